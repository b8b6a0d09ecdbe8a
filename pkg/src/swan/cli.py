"""Command-line surface: dataset synthesis, training, evaluation,
inference, gradient checking, complexity reporting.

Configuration comes from a flat JSON file with dotted keys
("model.channels", "train.lr0", "synth.count"); command-line flags
override file values, which override dataclass defaults. Unknown keys
are rejected before any work starts.

Exit codes: 0 success, 1 validation error, 2 runtime failure. Failures
print a single machine-parseable line `ERROR:<kind>:<message>` on
stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from .data import SynthConfig, load_dataset, save_dataset, synth_dataset
from .imageio import load_image, save_heatmap, save_image
from .metrics import report, roc_sweep, write_roc_csv
from .network import ModelConfig, TrainConfig, build_swan, complexity_report, infer
from .training import evaluate, load_checkpoint, train


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.code = 1 if kind == "validation" else 2


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "synth": SynthConfig}


def load_config(path=None, overrides=None):
    """Build (ModelConfig, TrainConfig, SynthConfig) from defaults, a flat
    dotted-key JSON file, then explicit overrides — in that precedence."""
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise CliError("validation", f"config file unreadable: {e}")
    values.update(overrides or {})
    parts = {name: {} for name in _SECTIONS}
    for key, val in values.items():
        section, _, fname = key.partition(".")
        cls = _SECTIONS.get(section)
        if cls is None or not fname:
            raise CliError("validation", f"unknown config key {key!r}")
        if fname not in {f.name for f in fields(cls)}:
            raise CliError("validation", f"unknown config key {key!r}")
        parts[section][fname] = val
    try:
        mcfg = ModelConfig(**parts["model"])
        tcfg = TrainConfig(**parts["train"])
        scfg = SynthConfig(**parts["synth"])
        if isinstance(mcfg.channels, list):
            mcfg.channels = tuple(mcfg.channels)
        mcfg.validate()
        tcfg.validate()
        scfg.validate()
    except (TypeError, ValueError) as e:
        raise CliError("validation", str(e))
    return mcfg, tcfg, scfg


def _collect_overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["model.seed"] = args.seed
        out["train.seed"] = args.seed
        out["synth.seed"] = args.seed
    if getattr(args, "threshold", None) is not None:
        out["train.threshold"] = args.threshold
    if getattr(args, "epochs", None) is not None:
        out["train.epochs"] = args.epochs
    return out


# -- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    _, _, scfg = load_config(args.config, _collect_overrides(args))
    samples = synth_dataset(scfg)
    try:
        save_dataset(samples, scfg, args.out, split_seed=scfg.seed)
    except OSError as e:
        raise CliError("runtime", f"cannot write dataset: {e}")
    print(json.dumps({"written": len(samples), "out": args.out}))
    return 0


def cmd_train(args) -> int:
    mcfg, tcfg, _ = load_config(args.config, _collect_overrides(args))
    try:
        train_set = load_dataset(args.data, subset="train")
        val_set = load_dataset(args.data, subset="test")
    except (OSError, KeyError, ValueError) as e:
        raise CliError("validation", f"cannot load dataset: {e}")
    model = build_swan(mcfg)
    try:
        log = train(model, train_set, val_set, tcfg, out_dir=args.out)
    except FloatingPointError as e:
        raise CliError("runtime", f"training aborted: {e}")
    print(json.dumps({"epochs_run": len(log), "final": log[-1]}))
    return 0


def _load_model(args):
    mcfg, tcfg, _ = load_config(args.config, _collect_overrides(args))
    model = build_swan(mcfg)
    try:
        load_checkpoint(model, args.checkpoint)
    except (OSError, ValueError) as e:
        raise CliError("runtime", f"cannot load checkpoint: {e}")
    return model, tcfg


def cmd_eval(args) -> int:
    model, tcfg = _load_model(args)
    try:
        test_set = load_dataset(args.data, subset="test")
    except (OSError, KeyError, ValueError) as e:
        raise CliError("validation", f"cannot load dataset: {e}")
    if not test_set:
        raise CliError("validation", "test subset is empty")
    from .data import preprocess
    from .training import _to_batch
    from . import tensor as T

    model.eval()
    probs, gts = [], []
    with T.no_grad():
        for s in test_set:
            ev = preprocess(s, train_mode=False)
            x, _ = _to_batch([ev])
            probs.append(model(x).fused.data[0, 0])
            gts.append(ev.mask)
    r = report(zip(probs, gts), threshold=tcfg.threshold)
    thresholds = [round(t, 2) for t in np.linspace(0.95, 0.05, 19)]
    points = roc_sweep(probs, gts, thresholds)
    r.roc = points
    print(r.to_json())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_roc_csv(points, os.path.join(args.out, "roc.csv"))
    return 0


def cmd_infer(args) -> int:
    model, tcfg = _load_model(args)
    try:
        img = load_image(args.image)
    except (OSError, ValueError) as e:
        raise CliError("validation", f"cannot load image: {e}")
    h, w = img.shape
    ph, pw = (-h) % 16, (-w) % 16
    padded = np.pad(img, ((ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)))
    mask, prob = infer(model, padded, threshold=tcfg.threshold)
    mask = mask[ph // 2:ph // 2 + h, pw // 2:pw // 2 + w]
    prob = prob[ph // 2:ph // 2 + h, pw // 2:pw // 2 + w]
    os.makedirs(args.out, exist_ok=True)
    save_image(mask.astype(np.float64), os.path.join(args.out, "mask.png"))
    save_heatmap(prob, os.path.join(args.out, "heatmap.png"))
    print(json.dumps({"positive_pixels": int(mask.sum()), "out": args.out}))
    return 0


def cmd_gradcheck(args) -> int:
    from .checks import run_gradcheck_suite

    failures = run_gradcheck_suite(args.scope, seed=args.seed or 0)
    if failures:
        raise CliError("runtime", "gradcheck failed: " + "; ".join(failures))
    print(json.dumps({"scope": args.scope, "status": "ok"}))
    return 0


def cmd_complexity(args) -> int:
    mcfg, _, _ = load_config(args.config, _collect_overrides(args))
    print(json.dumps(complexity_report(mcfg), indent=2))
    return 0


# -- argument parsing -------------------------------------------------------


def _common(p, checkpoint=False, data=False, out_required=False):
    p.add_argument("--config", help="flat dotted-key JSON config file")
    p.add_argument("--seed", type=int, help="root seed overriding all config seeds")
    p.add_argument("--device", help="reserved; rejected if set")
    if checkpoint:
        p.add_argument("--checkpoint", required=True, help="checkpoint file")
    if data:
        p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=out_required, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swan", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _common(p, out_required=True)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    _common(p, data=True, out_required=True)
    p.add_argument("--epochs", type=int, help="override train.epochs")
    p.add_argument("--threshold", type=float, help="override train.threshold")

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    _common(p, checkpoint=True, data=True)
    p.add_argument("--threshold", type=float, help="override train.threshold")

    p = sub.add_parser("infer", help="run one image through a checkpoint")
    _common(p, checkpoint=True, out_required=True)
    p.add_argument("--image", required=True, help="input PNG/PGM image")
    p.add_argument("--threshold", type=float, help="override train.threshold")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    _common(p)
    p.add_argument("scope", choices=("tensor-op", "hwconv", "ssa", "rdca", "network"))

    p = sub.add_parser("complexity", help="per-layer flops/params report")
    _common(p)
    return ap


_COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval,
             "infer": cmd_infer, "gradcheck": cmd_gradcheck,
             "complexity": cmd_complexity}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.device is not None:
            raise CliError("validation", "--device is reserved and cannot be set")
        return _COMMANDS[args.command](args)
    except CliError as e:
        print(f"ERROR:{e.kind}:{e}", file=sys.stderr)
        return e.code
    except OSError as e:
        print(f"ERROR:runtime:{e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
