"""Detection metrics vs independent brute-force pixel counting."""

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swan.metrics import (ConfusionCounts, confusion, report, roc_sweep,
                          target_level_counts, write_roc_csv)


def brute_counts(pred, gt):
    tp = fp = fn = tn = 0
    for p, g in zip(pred.ravel(), gt.ravel()):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def test_confusion_hand_cases():
    gt = np.zeros((4, 4), np.uint8)
    gt[:2, :2] = 1  # 4 positives
    pred = np.zeros((4, 4), np.uint8)
    pred[0, :2] = 1          # hits 2
    pred[3, 3] = 1           # 1 extra
    c = confusion(pred, gt)
    assert (c.tp, c.fn, c.fp, c.tn) == (2, 2, 1, 11)

    perfect = confusion(gt, gt)
    assert (perfect.tp, perfect.tn, perfect.fp, perfect.fn) == (4, 12, 0, 0)

    allzero = confusion(np.zeros_like(gt), gt)
    assert (allzero.fn, allzero.tn) == (4, 12)


def test_confusion_rejects_bad_input():
    with pytest.raises(ValueError):
        confusion(np.array([0, 2]), np.array([0, 1]))
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2)), np.zeros((3, 3)))


def test_report_hand_case():
    gt = np.zeros((4, 4), np.uint8)
    gt[:2, :2] = 1
    pred = np.zeros((4, 4), np.uint8)
    pred[0, :2] = 1
    pred[3, 3] = 1
    r = report([(pred, gt)])
    assert r.miou == pytest.approx(2 / 5)
    assert r.pd == pytest.approx(0.5)
    assert r.fa == pytest.approx(1 / 12)
    # 2TP/(2TP+FP+FN) = 4/7, consistent with f1 == 2*miou/(1+miou)
    assert r.f1 == pytest.approx(4 / 7)
    assert r.miou == r.niou  # singleton batch


def test_report_matches_bruteforce_oracle():
    rng = np.random.default_rng(0)
    pairs = []
    pooled = np.zeros(4, dtype=np.int64)
    ious = []
    for _ in range(200):
        pred = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        gt = (rng.random((16, 16)) > 0.7).astype(np.uint8)
        pairs.append((pred, gt))
        tp, fp, fn, tn = brute_counts(pred, gt)
        pooled += (tp, fp, fn, tn)
        if tp + fp + fn:
            ious.append(tp / (tp + fp + fn))
    r = report(pairs)
    tp, fp, fn, tn = (int(v) for v in pooled)
    assert (r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn) == (tp, fp, fn, tn)
    assert abs(r.miou - tp / (tp + fp + fn)) < 1e-12
    assert abs(r.pd - tp / (tp + fn)) < 1e-12
    assert abs(r.fa - fp / (fp + tn)) < 1e-12
    assert abs(r.f1 - 2 * tp / (2 * tp + fp + fn)) < 1e-12
    assert abs(r.niou - np.mean(ious)) < 1e-12
    # pooled identity
    assert abs(r.f1 - 2 * r.miou / (1 + r.miou)) < 1e-12


def test_niou_is_mean_of_per_image_iou():
    a = np.zeros((2, 4), np.uint8)
    a[0, :2] = 1
    gt_a = np.zeros((2, 4), np.uint8)
    gt_a[0, :] = 1  # IoU 0.5
    big = np.ones((10, 10), np.uint8)  # IoU 1.0 regardless of size
    r = report([(a, gt_a), (big, big)])
    assert r.niou == pytest.approx(0.75)


def test_empty_gt_reports_null_pd_not_zero():
    pred = np.zeros((4, 4), np.uint8)
    gt = np.zeros((4, 4), np.uint8)
    r = report([(pred, gt)])
    assert r.pd is None
    assert r.niou is None
    assert r.fa == 0.0
    d = json.loads(r.to_json())
    assert d["pd"] is None


def test_adding_correct_positive_never_decreases_scores():
    rng = np.random.default_rng(1)
    gt = (rng.random((8, 8)) > 0.6).astype(np.uint8)
    pred = (rng.random((8, 8)) > 0.5).astype(np.uint8) & gt
    missed = np.argwhere((gt == 1) & (pred == 0))
    r0 = report([(pred, gt)])
    for y, x in missed[:5]:
        pred2 = pred.copy()
        pred2[y, x] = 1
        r1 = report([(pred2, gt)])
        assert r1.pd >= r0.pd and r1.f1 >= r0.f1 and r1.miou >= r0.miou
        pred, r0 = pred2, r1


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_duplicating_an_image_keeps_niou_consistent(seed):
    rng = np.random.default_rng(seed)
    pred = (rng.random((6, 6)) > 0.5).astype(np.uint8)
    gt = (rng.random((6, 6)) > 0.5).astype(np.uint8)
    pred2 = (rng.random((6, 6)) > 0.5).astype(np.uint8)
    gt2 = np.ones((6, 6), np.uint8)
    r = report([(pred, gt), (pred2, gt2), (pred2, gt2)])
    # direct recomputation of the mean with the duplicate included
    per = []
    for p, g in [(pred, gt), (pred2, gt2), (pred2, gt2)]:
        tp, fp, fn, _ = brute_counts(p, g)
        if tp + fp + fn:
            per.append(tp / (tp + fp + fn))
    assert r.niou == pytest.approx(np.mean(per))


def test_roc_sweep_extremes_and_oracle():
    rng = np.random.default_rng(2)
    probs = [rng.random((8, 8)) for _ in range(5)]
    gts = [(rng.random((8, 8)) > 0.8).astype(np.uint8) for _ in range(5)]
    thresholds = [0.9, 0.5, 0.1, 0.001]
    pts = roc_sweep(probs, gts, thresholds)
    assert len(pts) == 4
    # matches per-threshold report() exactly
    for (t, fa, pd) in pts:
        r = report([(p, g) for p, g in zip(probs, gts)], threshold=t)
        assert fa == r.fa and pd == r.pd
    # pd non-decreasing as threshold decreases
    pds = [p for _, _, p in pts]
    assert all(b >= a for a, b in zip(pds, pds[1:]))
    # near-zero threshold: everything predicted positive
    assert pts[-1][2] == 1.0


def test_perfect_separator_point():
    gt = np.zeros((4, 4), np.uint8)
    gt[1, 1] = 1
    prob = gt * 0.99 + 0.001
    pts = roc_sweep([prob], [gt], [0.5])
    assert pts[0][1] == 0.0 and pts[0][2] == 1.0


def test_roc_rejects_bad_thresholds():
    with pytest.raises(ValueError):
        roc_sweep([], [], [0.1, 0.5])
    with pytest.raises(ValueError):
        roc_sweep([], [], [1.5])


def test_roc_csv(tmp_path):
    path = tmp_path / "roc.csv"
    write_roc_csv([(0.5, 0.1, 0.9)], path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["threshold", "fa", "pd"]
    assert rows[1] == ["0.5", "0.1", "0.9"]


def test_counts_addition_and_total():
    a = ConfusionCounts(1, 2, 3, 4)
    b = ConfusionCounts(10, 20, 30, 40)
    s = a + b
    assert (s.tp, s.fp, s.fn, s.tn) == (11, 22, 33, 44)
    assert s.total == 110


def test_target_level_counts():
    gt = np.zeros((8, 8), np.uint8)
    gt[1:3, 1:3] = 1   # component A
    gt[6, 6] = 1       # component B
    pred = np.zeros((8, 8), np.uint8)
    pred[2, 2] = 1     # overlaps A
    pred[0, 7] = 1     # false component
    detected, total, false_comp = target_level_counts(pred, gt)
    assert (detected, total, false_comp) == (1, 2, 1)
