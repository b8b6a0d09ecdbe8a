#!/usr/bin/env python3
"""Train the width-reduced model on a 200-image synthetic dataset and
report held-out metrics.

Usage: python3 scripts/train_toy.py [--seed N] [--epochs N] [--out DIR]
"""

import argparse
import json
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from swan.data import SynthConfig, split, synth_dataset
from swan.network import ModelConfig, TrainConfig, build_swan
from swan.training import evaluate, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--out", default=None)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--lr0", type=float, default=4e-3)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--scr-min", type=float, default=5.0)
    ap.add_argument("--scr-max", type=float, default=9.0)
    ap.add_argument("--noise", type=float, default=0.01)
    ap.add_argument("--radius-min", type=float, default=2.0)
    args = ap.parse_args()

    # scr_min >= 5 keeps the faintest mask pixels statistically separable
    # from background noise at a 0.5 decision threshold; moderate pixel
    # noise keeps the half-peak mask boundary crisply localized
    dataset = synth_dataset(SynthConfig(count=args.count, size=64,
                                        scr_min=args.scr_min,
                                        scr_max=args.scr_max,
                                        noise_sigma=args.noise,
                                        radius_min=args.radius_min,
                                        seed=args.seed))
    train_set, test_set = split(dataset, ratio=0.8, seed=args.seed)

    mcfg = ModelConfig(channels=(8, 16, 32, 64, 128), hwconv_levels=2,
                       m=8, seed=args.seed)
    tcfg = TrainConfig(epochs=args.epochs, batch=args.batch, crop=64,
                       seed=args.seed, lr0=args.lr0, lr_min=2e-4)
    model = build_swan(mcfg)

    t0 = time.time()
    log = train(model, train_set, test_set, tcfg, out_dir=args.out,
                stop_miou=0.5, stop_pd=0.9)
    final = evaluate(model, test_set, threshold=tcfg.threshold)
    print(json.dumps({"epochs_run": len(log), "minutes": (time.time() - t0) / 60,
                      **final}, indent=2))


if __name__ == "__main__":
    main()
