"""Pixel-level detection metrics and ROC sweeps for binary masks.

miou, pd, fa and f1 pool TP/FP/FN/TN counts over the whole batch; niou
averages per-image IoU so large targets cannot dominate. Metric terms
with an empty denominator are reported as None rather than 0 or 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    miou: float | None
    niou: float | None
    pd: float | None
    fa: float | None
    f1: float | None
    n_samples: int
    counts: ConfusionCounts
    roc: list[tuple[float, float, float]] = field(default_factory=list)  # (thr, fa, pd)

    def to_dict(self) -> dict:
        return {
            "miou": self.miou, "niou": self.niou, "pd": self.pd,
            "fa": self.fa, "f1": self.f1, "n_samples": self.n_samples,
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp,
                       "fn": self.counts.fn, "tn": self.counts.tn},
            "roc": [{"threshold": t, "fa": fa, "pd": pd} for t, fa, pd in self.roc],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def _check_binary(a: np.ndarray, name: str):
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must be strictly binary (0/1)")


def confusion(pred_mask: np.ndarray, gt_mask: np.ndarray) -> ConfusionCounts:
    pred = np.asarray(pred_mask)
    gt = np.asarray(gt_mask)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    _check_binary(pred, "pred_mask")
    _check_binary(gt, "gt_mask")
    p = pred.astype(bool)
    g = gt.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp, fp, fn, tn)


def report(pairs, threshold: float | None = None) -> MetricsReport:
    """Evaluate (pred, gt) pairs; pred may be probabilities if threshold is set.

    miou/pd/fa/f1 come from pooled counts; niou is the mean per-image
    TP/(T+P-TP), with empty images (no gt and no prediction) contributing
    IoU 1 by the 0/0 -> skip convention (they are excluded from the mean).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("report() needs a nonempty batch")
    pooled = ConfusionCounts()
    per_image = []
    for pred, gt in pairs:
        pred = np.asarray(pred)
        if threshold is not None:
            pred = (pred >= threshold).astype(np.uint8)
        c = confusion(pred, gt)
        pooled = pooled + c
        denom = c.tp + c.fp + c.fn
        if denom > 0:
            per_image.append(c.tp / denom)
    niou = float(np.mean(per_image)) if per_image else None
    miou = _ratio(pooled.tp, pooled.tp + pooled.fp + pooled.fn)
    return MetricsReport(
        miou=miou,
        niou=niou,
        pd=_ratio(pooled.tp, pooled.tp + pooled.fn),
        fa=_ratio(pooled.fp, pooled.fp + pooled.tn),
        f1=_ratio(2 * pooled.tp, 2 * pooled.tp + pooled.fp + pooled.fn),
        n_samples=len(pairs),
        counts=pooled,
    )


def roc_sweep(prob_maps, gts, thresholds) -> list[tuple[float, float, float]]:
    """One (threshold, fa, pd) point per threshold; thresholds strictly descending."""
    thresholds = list(thresholds)
    if any(not (0.0 < t < 1.0) for t in thresholds):
        raise ValueError("thresholds must lie strictly inside (0, 1)")
    if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly descending")
    prob_maps = list(prob_maps)
    gts = list(gts)
    points = []
    for t in thresholds:
        r = report(zip(prob_maps, gts), threshold=t)
        points.append((t, r.fa if r.fa is not None else 0.0,
                       r.pd if r.pd is not None else 0.0))
    return points


def write_roc_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fa", "pd"])
        for t, fa, pd in points:
            w.writerow([t, fa, pd])


def target_level_counts(pred_mask: np.ndarray, gt_mask: np.ndarray):
    """Optional component-level detection counts (8-connectivity).

    A gt component counts as detected when any predicted pixel overlaps
    it; a predicted component with no gt overlap is one false alarm.
    Returns (detected, total_targets, false_components). This mode is an
    extra beyond the pixel-wise definitions above.
    """
    pred = np.asarray(pred_mask).astype(bool)
    gt = np.asarray(gt_mask).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError("shape mismatch")
    gt_lab, n_gt = _label8(gt)
    pr_lab, n_pr = _label8(pred)
    detected = sum(1 for i in range(1, n_gt + 1) if pred[gt_lab == i].any())
    false_comp = sum(1 for j in range(1, n_pr + 1) if not gt[pr_lab == j].any())
    return detected, n_gt, false_comp


def _label8(mask: np.ndarray):
    """8-connected component labeling via iterative flood fill."""
    lab = np.zeros(mask.shape, dtype=np.int32)
    nxt = 0
    h, w = mask.shape
    for sy, sx in zip(*np.nonzero(mask)):
        if lab[sy, sx]:
            continue
        nxt += 1
        stack = [(sy, sx)]
        lab[sy, sx] = nxt
        while stack:
            y, x = stack.pop()
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    ny, nx_ = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx_ < w and mask[ny, nx_] and not lab[ny, nx_]:
                        lab[ny, nx_] = nxt
                        stack.append((ny, nx_))
    return lab, nxt
