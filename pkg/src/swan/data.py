"""Synthetic small-target imagery, preprocessing, and dataset layout.

Scenes are built from smoothed-noise clutter plus a slow illumination
gradient and pixel noise; targets are Gaussian-profile blobs whose
amplitude is solved from the local background statistics so each sample
lands at its requested signal-to-clutter ratio. Masks mark pixels where
the target profile exceeds half its peak.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .imageio import load_image, save_image

ANNULUS_OUTER = 15  # SCR measurement window (box side)
ANNULUS_INNER = 9   # excluded target core (box side, covers the full footprint)


@dataclass
class Sample:
    image: np.ndarray  # (H, W) float32 in [0, 1]
    mask: np.ndarray   # (H, W) uint8 in {0, 1}
    meta: dict = field(default_factory=dict)

    def validate(self):
        if self.image.shape != self.mask.shape:
            raise ValueError("image and mask shapes differ")
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("mask must be binary")


@dataclass
class SynthConfig:
    count: int = 200
    size: int = 64
    targets_min: int = 1
    targets_max: int = 3
    radius_min: float = 1.0
    radius_max: float = 4.0
    scr_min: float = 4.0
    scr_max: float = 8.0
    clutter_scale: float = 8.0     # smoothing length of the background clutter
    clutter_strength: float = 0.08
    gradient_strength: float = 0.15
    noise_sigma: float = 0.02
    base_level: float = 0.35
    seed: int = 0

    def validate(self):
        if self.count < 0 or self.size < 16:
            raise ValueError("count must be >= 0 and size >= 16")
        if not (0 <= self.targets_min <= self.targets_max):
            raise ValueError("invalid targets range")
        if not (0.5 <= self.radius_min <= self.radius_max <= 4.0):
            raise ValueError("target radius must stay within [0.5, 4] px (small-target regime)")
        if not (0 < self.scr_min <= self.scr_max):
            raise ValueError("invalid SCR range")
        if self.scr_max * self.noise_sigma > 0.9:
            raise ValueError("impossible SCR/intensity combination: peaks would saturate")


def _gaussian_blur(img: np.ndarray, sigma: float, rng_pad: int = 3) -> np.ndarray:
    r = max(1, int(np.ceil(rng_pad * sigma)))
    x = np.arange(-r, r + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    pad = np.pad(img, r, mode="reflect")
    tmp = np.apply_along_axis(lambda m: np.convolve(m, k, mode="valid"), 0, pad)
    return np.apply_along_axis(lambda m: np.convolve(m, k, mode="valid"), 1, pad)[:, r:-r] if False else \
        np.apply_along_axis(lambda m: np.convolve(m, k, mode="valid"), 1, tmp)


def _background(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    s = cfg.size
    clutter = _gaussian_blur(rng.normal(size=(s, s)), cfg.clutter_scale / 2.0)
    clutter *= cfg.clutter_strength / max(clutter.std(), 1e-8)
    gy, gx = np.meshgrid(np.linspace(-1, 1, s), np.linspace(-1, 1, s), indexing="ij")
    a, b = rng.uniform(-1, 1, size=2)
    grad = cfg.gradient_strength * 0.5 * (a * gy + b * gx)
    noise = rng.normal(0.0, cfg.noise_sigma, size=(s, s))
    return cfg.base_level + clutter + grad + noise


def _annulus_stats(img: np.ndarray, cy: int, cx: int) -> tuple[float, float]:
    s = img.shape[0]
    ro, ri = ANNULUS_OUTER // 2, ANNULUS_INNER // 2
    y0, y1 = max(cy - ro, 0), min(cy + ro + 1, s)
    x0, x1 = max(cx - ro, 0), min(cx + ro + 1, s)
    patch = img[y0:y1, x0:x1].copy()
    my0, my1 = cy - ri - y0, cy + ri + 1 - y0
    mx0, mx1 = cx - ri - x0, cx + ri + 1 - x0
    sel = np.ones(patch.shape, dtype=bool)
    sel[max(my0, 0):my1, max(mx0, 0):mx1] = False
    ring = patch[sel]
    return float(ring.mean()), float(ring.std())


def measure_scr(img: np.ndarray, cy: int, cx: int) -> float:
    """(peak - annulus mean) / annulus std around (cy, cx)."""
    mu, sd = _annulus_stats(img, cy, cx)
    return (float(img[cy, cx]) - mu) / max(sd, 1e-8)


def _synth_sample(cfg: SynthConfig, rng: np.random.Generator, index: int) -> Sample:
    s = cfg.size
    img = _background(cfg, rng)
    mask = np.zeros((s, s), dtype=np.uint8)
    n_targets = int(rng.integers(cfg.targets_min, cfg.targets_max + 1))
    margin = ANNULUS_OUTER // 2 + 1
    centers: list[tuple[int, int]] = []
    targets_meta = []
    attempts = 0
    while len(centers) < n_targets and attempts < 200:
        attempts += 1
        cy = int(rng.integers(margin, s - margin))
        cx = int(rng.integers(margin, s - margin))
        if any((cy - y) ** 2 + (cx - x) ** 2 < (2 * ANNULUS_OUTER) ** 2 for y, x in centers):
            continue
        radius = float(rng.uniform(cfg.radius_min, cfg.radius_max))
        scr = float(rng.uniform(cfg.scr_min, cfg.scr_max))
        mu, sd = _annulus_stats(img, cy, cx)
        # peak is placed so the measured SCR comes out at the requested value
        amp = scr * sd - (float(img[cy, cx]) - mu)
        # reject placements that would do nothing or clip the peak
        if amp <= 0 or float(img[cy, cx]) + amp > 0.98:
            continue
        yy, xx = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
        profile = amp * np.exp(-0.5 * (((yy - cy) ** 2 + (xx - cx) ** 2) / radius ** 2))
        # keep the footprint inside the small-target criterion (<= 9x9)
        profile[np.maximum(np.abs(yy - cy), np.abs(xx - cx)) > 4] = 0.0
        img = img + profile
        mask[profile > 0.5 * amp] = 1
        centers.append((cy, cx))
        targets_meta.append({"cy": cy, "cx": cx, "radius": radius, "scr": scr})
    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    sample = Sample(image=img, mask=mask,
                    meta={"index": index, "targets": targets_meta})
    sample.validate()
    return sample


def synth_dataset(cfg: SynthConfig) -> list[Sample]:
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    out = []
    for i, ss in enumerate(root.spawn(cfg.count)):
        out.append(_synth_sample(cfg, np.random.default_rng(ss), i))
    return out


# -- preprocessing ----------------------------------------------------------


def normalize_minmax(img: np.ndarray) -> np.ndarray:
    lo, hi = float(img.min()), float(img.max())
    if hi - lo < 1e-12:
        return np.zeros_like(img, dtype=np.float32)
    return ((img - lo) / (hi - lo)).astype(np.float32)


def preprocess(sample: Sample, train_mode: bool, crop: int = 256,
               rng: np.random.Generator | None = None, flip: bool = False) -> Sample:
    """Min-max normalize; random crop (+optional h-flip) in train mode,
    center-pad to a multiple of 16 in eval mode."""
    img = normalize_minmax(sample.image)
    mask = sample.mask
    h, w = img.shape
    if train_mode:
        if rng is None:
            raise ValueError("train-mode preprocess needs an rng")
        ph, pw = max(crop - h, 0), max(crop - w, 0)
        if ph or pw:
            img = np.pad(img, ((0, ph), (0, pw)))
            mask = np.pad(mask, ((0, ph), (0, pw)))
            h, w = img.shape
        oy = int(rng.integers(0, h - crop + 1))
        ox = int(rng.integers(0, w - crop + 1))
        img = img[oy:oy + crop, ox:ox + crop]
        mask = mask[oy:oy + crop, ox:ox + crop]
        if flip and rng.random() < 0.5:
            img = img[:, ::-1].copy()
            mask = mask[:, ::-1].copy()
    else:
        th, tw = -h % 16, -w % 16
        if th or tw:
            img = np.pad(img, ((th // 2, th - th // 2), (tw // 2, tw - tw // 2)))
            mask = np.pad(mask, ((th // 2, th - th // 2), (tw // 2, tw - tw // 2)))
    out = Sample(image=img.astype(np.float32), mask=mask.astype(np.uint8),
                 meta=dict(sample.meta))
    out.validate()
    return out


def split(dataset: list[Sample], ratio: float = 0.8, seed: int = 0):
    """Seeded disjoint shuffle-split into (train, test)."""
    if len(dataset) < 2:
        raise ValueError("split needs at least 2 samples")
    order = np.random.default_rng(seed).permutation(len(dataset))
    k = int(round(len(dataset) * ratio))
    train = [dataset[i] for i in order[:k]]
    test = [dataset[i] for i in order[k:]]
    return train, test


# -- on-disk layout ---------------------------------------------------------


def save_dataset(samples: list[Sample], cfg: SynthConfig, out_dir,
                 split_seed: int = 0, ratio: float = 0.8):
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)
    order = np.random.default_rng(split_seed).permutation(len(samples))
    k = int(round(len(samples) * ratio))
    assignment = {}
    for rank, idx in enumerate(order):
        assignment[f"{idx:04d}"] = "train" if rank < k else "test"
    for i, s in enumerate(samples):
        save_image(s.image, os.path.join(out_dir, "images", f"{i:04d}.png"))
        save_image(s.mask.astype(np.float64), os.path.join(out_dir, "masks", f"{i:04d}.png"))
    manifest = {
        "seed": cfg.seed,
        "config": asdict(cfg),
        "split_seed": split_seed,
        "ratio": ratio,
        "split": assignment,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_dataset(data_dir, subset: str | None = None) -> list[Sample]:
    with open(os.path.join(data_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    out = []
    for key in sorted(manifest["split"]):
        if subset is not None and manifest["split"][key] != subset:
            continue
        img = load_image(os.path.join(data_dir, "images", f"{key}.png"))
        mask = (load_image(os.path.join(data_dir, "masks", f"{key}.png")) > 0.5).astype(np.uint8)
        out.append(Sample(image=img, mask=mask, meta={"index": int(key), "subset": manifest["split"][key]}))
    return out
