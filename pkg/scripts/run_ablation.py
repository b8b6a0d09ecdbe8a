#!/usr/bin/env python3
"""Ablation sweep: full model vs wavelet-encoder-only vs plain baseline,
averaged over seeds, on a reduced toy budget.

Usage: python3 scripts/run_ablation.py [--seeds 0 1 2] [--epochs N]
"""

import argparse
import json
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from swan.data import SynthConfig, split, synth_dataset
from swan.network import ModelConfig, TrainConfig, build_swan
from swan.training import evaluate, train

VARIANTS = {
    "full": dict(use_hwconv=True, use_ssa=True, use_rdca=True),
    "hwconv_only": dict(use_hwconv=True, use_ssa=False, use_rdca=False),
    "baseline": dict(use_hwconv=False, use_ssa=False, use_rdca=False),
}


def run_one(variant: str, seed: int, epochs: int, count: int) -> dict:
    dataset = synth_dataset(SynthConfig(count=count, size=64, scr_min=5.0,
                                        scr_max=9.0, noise_sigma=0.01,
                                        radius_min=2.0, seed=seed))
    train_set, test_set = split(dataset, ratio=0.8, seed=seed)
    mcfg = ModelConfig(channels=(8, 16, 32, 64, 128), hwconv_levels=2, m=8,
                       seed=seed, **VARIANTS[variant])
    tcfg = TrainConfig(epochs=epochs, batch=16, crop=64, seed=seed,
                       lr0=4e-3, lr_min=2e-4)
    model = build_swan(mcfg)
    train(model, train_set, test_set, tcfg)
    return evaluate(model, test_set, threshold=tcfg.threshold)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--count", type=int, default=200)
    args = ap.parse_args()

    results = {}
    for variant in VARIANTS:
        scores = []
        for seed in args.seeds:
            t0 = time.time()
            m = run_one(variant, seed, args.epochs, args.count)
            scores.append(m["miou"] or 0.0)
            print(f"{variant} seed={seed}: miou={m['miou']:.4f} "
                  f"({(time.time() - t0) / 60:.1f} min)", flush=True)
        results[variant] = float(np.mean(scores))
    print(json.dumps(results, indent=2))
    order_ok = results["full"] >= results["hwconv_only"] >= results["baseline"]
    print("ordering full >= hwconv_only >= baseline:", order_ok)


if __name__ == "__main__":
    main()
