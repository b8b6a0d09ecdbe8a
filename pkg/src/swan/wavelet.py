"""2-D wavelet analysis/synthesis and the nested wavelet-convolution block.

The Haar path uses an orthonormal 2x2 butterfly (each coefficient scaled
by 1/2), so total subband energy equals input energy and the backward
pass of the analysis step is exactly the synthesis step. Other families
run through dense per-axis filter-bank matrices with periodic extension;
their synthesis phase is calibrated numerically once per family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .layers import BatchNorm2d, Conv2d, Module
from .tensor import Tensor, _make, _accum  # noqa: F401  (op construction)

FAMILIES = ("haar", "symlet", "coiflet", "biorthogonal", "reverse_biorthogonal")

_SQ2 = float(np.sqrt(2.0))

# dec_lo, dec_hi, rec_lo, rec_hi per family (periodic filter banks)
_FILTERS = {
    "symlet": (
        [-0.12940952255092145, 0.22414386804185735, 0.836516303737469, 0.48296291314469025],
        [-0.48296291314469025, 0.836516303737469, -0.22414386804185735, -0.12940952255092145],
        [0.48296291314469025, 0.836516303737469, 0.22414386804185735, -0.12940952255092145],
        [-0.12940952255092145, -0.22414386804185735, 0.836516303737469, -0.48296291314469025],
    ),
    "coiflet": (
        [-0.01565572813546454, -0.0727326195128539, 0.38486484686420286,
         0.8525720202122554, 0.3378976624578092, -0.0727326195128539],
        [0.0727326195128539, 0.3378976624578092, -0.8525720202122554,
         0.38486484686420286, 0.0727326195128539, -0.01565572813546454],
        [-0.0727326195128539, 0.3378976624578092, 0.8525720202122554,
         0.38486484686420286, -0.0727326195128539, -0.01565572813546454],
        [-0.01565572813546454, 0.0727326195128539, 0.38486484686420286,
         -0.8525720202122554, 0.3378976624578092, 0.0727326195128539],
    ),
    "biorthogonal": (
        [-1 / (4 * _SQ2), 1 / (2 * _SQ2), 3 / (2 * _SQ2), 1 / (2 * _SQ2), -1 / (4 * _SQ2)],
        [1 / (2 * _SQ2), -1 / _SQ2, 1 / (2 * _SQ2)],
        [1 / (2 * _SQ2), 1 / _SQ2, 1 / (2 * _SQ2)],
        [-1 / (4 * _SQ2), -1 / (2 * _SQ2), 3 / (2 * _SQ2), -1 / (2 * _SQ2), -1 / (4 * _SQ2)],
    ),
}
_FILTERS["reverse_biorthogonal"] = (
    _FILTERS["biorthogonal"][2],
    _FILTERS["biorthogonal"][3],
    _FILTERS["biorthogonal"][0],
    _FILTERS["biorthogonal"][1],
)

_MATRIX_CACHE: dict = {}
_PHASE_CACHE: dict = {}


@dataclass
class Subbands:
    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor
    pad: tuple[int, int] = (0, 0)  # replicate padding applied (bottom, right)

    def as_tuple(self):
        return (self.ll, self.lh, self.hl, self.hh)


@dataclass
class WaveletPyramid:
    levels: list[Subbands] = field(default_factory=list)
    family: str = "haar"


# -- Haar fast path ---------------------------------------------------------


def _haar_fwd_np(d: np.ndarray) -> np.ndarray:
    a = d[..., 0::2, 0::2]
    b = d[..., 0::2, 1::2]
    c = d[..., 1::2, 0::2]
    e = d[..., 1::2, 1::2]
    return np.concatenate(
        [(a + b + c + e) * 0.5, (a - b + c - e) * 0.5,
         (a + b - c - e) * 0.5, (a - b - c + e) * 0.5], axis=-3)


def _haar_inv_np(y: np.ndarray) -> np.ndarray:
    c4 = y.shape[-3]
    c = c4 // 4
    ll, lh, hl, hh = (y[..., i * c:(i + 1) * c, :, :] for i in range(4))
    a = (ll + lh + hl + hh) * 0.5
    b = (ll - lh + hl - hh) * 0.5
    cc = (ll + lh - hl - hh) * 0.5
    d = (ll - lh - hl + hh) * 0.5
    h2, w2 = y.shape[-2], y.shape[-1]
    out = np.empty(y.shape[:-3] + (c, 2 * h2, 2 * w2), dtype=y.dtype)
    out[..., 0::2, 0::2] = a
    out[..., 0::2, 1::2] = b
    out[..., 1::2, 0::2] = cc
    out[..., 1::2, 1::2] = d
    return out


def haar_dwt2_stack(x: Tensor) -> Tensor:
    """(N,C,H,W) -> (N,4C,H/2,W/2); channel groups [LL, LH, HL, HH]."""
    n, c, h, w = x.shape
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise ValueError(f"haar_dwt2_stack needs even spatial extents >= 2, got {h}x{w}")
    data = _haar_fwd_np(x.data)

    def bw(g):
        _accum(x, _haar_inv_np(g))

    return _make(data, (x,), bw)


def haar_iwt2_stack(y: Tensor) -> Tensor:
    if y.shape[1] % 4:
        raise ValueError("subband stack channel count must be divisible by 4")
    data = _haar_inv_np(y.data)

    def bw(g):
        _accum(y, _haar_fwd_np(g))

    return _make(data, (y,), bw)


# -- generic separable filter banks ----------------------------------------


def _band_matrix(filt, length: int, delta: int = 0) -> np.ndarray:
    half = length // 2
    m = np.zeros((half, length))
    for n in range(half):
        for k, v in enumerate(filt):
            m[n, (2 * n + k - delta) % length] += v
    return m


def _analysis_matrix(family: str, length: int) -> np.ndarray:
    dec_lo, dec_hi, _, _ = _FILTERS[family]
    return np.vstack([_band_matrix(dec_lo, length), _band_matrix(dec_hi, length)])


def _calibrate_phase(family: str):
    """Find synthesis-row phases/sign giving perfect reconstruction."""
    if family in _PHASE_CACHE:
        return _PHASE_CACHE[family]
    length = 16
    a = _analysis_matrix(family, length)
    _, _, rec_lo, rec_hi = _FILTERS[family]
    eye = np.eye(length)
    for dlo in range(length):
        for dhi in range(length):
            for sign in (1.0, -1.0):
                r = np.vstack([_band_matrix(rec_lo[::-1], length, dlo),
                               sign * np.asarray(_band_matrix(rec_hi[::-1], length, dhi))])
                m = r.T @ a
                if np.abs(m - eye).max() < 1e-8:
                    # store phases as signed offsets so they transfer to any length
                    canon = tuple(d - length if d > length // 2 else d for d in (dlo, dhi))
                    _PHASE_CACHE[family] = (canon[0], canon[1], sign)
                    return _PHASE_CACHE[family]
    raise ValueError(f"no perfect-reconstruction phase found for family '{family}'")


def _matrices(family: str, length: int):
    key = (family, length)
    if key not in _MATRIX_CACHE:
        if length < 2 or length % 2:
            raise ValueError(f"filter-bank transform needs even length >= 2, got {length}")
        a = _analysis_matrix(family, length)
        dlo, dhi, sign = _calibrate_phase(family)
        _, _, rec_lo, rec_hi = _FILTERS[family]
        r = np.vstack([_band_matrix(rec_lo[::-1], length, dlo),
                       sign * np.asarray(_band_matrix(rec_hi[::-1], length, dhi))])
        _MATRIX_CACHE[key] = (a, r.T)
    return _MATRIX_CACHE[key]


def dwt2_stack(x: Tensor, family: str = "haar") -> Tensor:
    """One analysis level; output (N,4C,H/2,W/2), groups [LL, LH, HL, HH]."""
    if family == "haar":
        return haar_dwt2_stack(x)
    if family not in _FILTERS:
        raise ValueError(f"unknown wavelet family '{family}'")
    n, c, h, w = x.shape
    ah, _ = _matrices(family, h)
    aw, _ = _matrices(family, w)
    y = T.apply_matrix(T.apply_matrix(x, ah, -2), aw, -1)
    h2, w2 = h // 2, w // 2
    ll = T.crop2d(y, h2, w2, 0, 0)
    lh = T.crop2d(y, h2, w2, 0, w2)
    hl = T.crop2d(y, h2, w2, h2, 0)
    hh = T.crop2d(y, h2, w2, h2, w2)
    return T.concat([ll, lh, hl, hh], axis=1)


def iwt2_stack(y: Tensor, family: str = "haar") -> Tensor:
    if family == "haar":
        return haar_iwt2_stack(y)
    if family not in _FILTERS:
        raise ValueError(f"unknown wavelet family '{family}'")
    n, c4, h2, w2 = y.shape
    c = c4 // 4
    ll = T.slice_axis(y, 1, 0, c)
    lh = T.slice_axis(y, 1, c, 2 * c)
    hl = T.slice_axis(y, 1, 2 * c, 3 * c)
    hh = T.slice_axis(y, 1, 3 * c, 4 * c)
    top = T.concat([ll, lh], axis=-1)
    bot = T.concat([hl, hh], axis=-1)
    grid = T.concat([top, bot], axis=-2)
    _, sh = _matrices(family, 2 * h2)
    _, sw = _matrices(family, 2 * w2)
    return T.apply_matrix(T.apply_matrix(grid, sh, -2), sw, -1)


# -- public subband API -----------------------------------------------------


def _split_stack(stack: Tensor, pad=(0, 0)) -> Subbands:
    c = stack.shape[1] // 4
    parts = [T.slice_axis(stack, 1, i * c, (i + 1) * c) for i in range(4)]
    return Subbands(*parts, pad=pad)


def haar_dwt2(x: Tensor) -> Subbands:
    """Orthonormal Haar analysis; odd extents are replicate-padded by one."""
    n, c, h, w = x.shape
    if h == 0 or w == 0:
        raise ValueError("haar_dwt2 on zero-sized spatial dims")
    pb, pr = h % 2, w % 2
    if pb or pr:
        x = T.replicate_pad_br(x, pb, pr)
    return _split_stack(haar_dwt2_stack(x), pad=(pb, pr))


def haar_iwt2(sb: Subbands) -> Tensor:
    shapes = {t.shape for t in sb.as_tuple()}
    if len(shapes) != 1:
        raise ValueError(f"subband shapes disagree: {sorted(shapes)}")
    out = haar_iwt2_stack(T.concat(list(sb.as_tuple()), axis=1))
    pb, pr = sb.pad
    if pb or pr:
        h, w = out.shape[-2], out.shape[-1]
        out = T.crop2d(out, h - pb, w - pr)
    return out


def dwt_pyramid(x: Tensor, levels: int, family: str = "haar") -> WaveletPyramid:
    """Nested analysis: each level decomposes the previous level's LL."""
    pyr = WaveletPyramid(family=family)
    cur = x
    for _ in range(levels):
        stack = dwt2_stack(cur, family)
        sb = _split_stack(stack)
        pyr.levels.append(sb)
        cur = sb.ll
    return pyr


# -- nested wavelet convolution block ---------------------------------------


class HWConv(Module):
    """Nested wavelet-domain convolution with a parallel spatial branch.

    Per level, the four subbands of the running LL chain are convolved
    jointly as a 4*Cin-channel tensor (3x3 conv + BN + relu). The deepest
    level is inverse-transformed and added into the LL group of the level
    above before that level's inverse transform; a spatial 3x3 conv on
    the raw input joins the final reconstruction.
    """

    def __init__(self, cin: int, cout: int, levels: int, rng: np.random.Generator,
                 family: str = "haar", norm_act: bool = True, dtype=np.float32):
        super().__init__()
        if levels < 1:
            raise ValueError("HWConv needs levels >= 1")
        if family not in FAMILIES:
            raise ValueError(f"unknown wavelet family '{family}'")
        self.cin = cin
        self.cout = cout
        self.levels = levels
        self.family = family
        self.norm_act = norm_act
        self.spatial = Conv2d(cin, cout, 3, rng, dtype=dtype)
        for l in range(levels):
            setattr(self, f"band_conv{l}", Conv2d(4 * cin, 4 * cout, 3, rng, dtype=dtype))
            setattr(self, f"band_bn{l}", BatchNorm2d(4 * cout, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        if c != self.cin:
            raise ValueError(f"HWConv expects {self.cin} channels, got {c}")
        step = 1 << self.levels
        if step > min(h, w):
            raise ValueError(f"nesting level {self.levels} too deep for {h}x{w} input")
        pb = (-h) % step
        pr = (-w) % step
        xp = T.replicate_pad_br(x, pb, pr)

        stacks = []
        cur = xp
        for l in range(self.levels):
            stack = dwt2_stack(cur, self.family)
            stacks.append(stack)
            cur = T.slice_axis(stack, 1, 0, self.cin)

        processed = []
        for l, stack in enumerate(stacks):
            f = getattr(self, f"band_conv{l}")(stack)
            if self.norm_act:
                f = T.relu(getattr(self, f"band_bn{l}")(f))
            processed.append(f)

        rec = iwt2_stack(processed[-1], self.family)
        for l in range(self.levels - 2, -1, -1):
            f = processed[l]
            ll = T.slice_axis(f, 1, 0, self.cout)
            rest = T.slice_axis(f, 1, self.cout, 4 * self.cout)
            rec = iwt2_stack(T.concat([ll + rec, rest], axis=1), self.family)

        out = rec + self.spatial(xp)
        if pb or pr:
            out = T.crop2d(out, h, w)
        return out


def hwconv_forward(x: Tensor, block: HWConv, levels: int | None = None) -> Tensor:
    if levels is not None and levels != block.levels:
        raise ValueError("levels argument disagrees with the block's configuration")
    return block(x)


# -- complexity calculators -------------------------------------------------


def flops_standard_conv(cin: int, cout: int, k: int, h: int, w: int) -> int:
    """Multiply count of a dense KxK convolution over an HxW map."""
    for v in (cin, cout, k, h, w):
        if v < 1:
            raise ValueError("all arguments must be >= 1")
    return cin * cout * k * k * h * w

def params_hwconv(c: int, levels: int, h: int, w: int) -> int:
    """Nested-transform cost model: 4C * sum_{l=0..levels} (H/2^l)(W/2^l)."""
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(f"{h}x{w} not divisible by 2^{levels}")
    total = 0
    for l in range(levels + 1):
        total += (h >> l) * (w >> l)
    return 4 * c * total
