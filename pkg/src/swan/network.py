"""Full detection network: wavelet-convolution encoder, windowed-attention
skip refinement, dual-channel decoder fusion, deep supervision.

Encoder: five stages of nested wavelet convolution separated by 2x2 max
pooling. Each skip feature and the bottleneck pass through an attention
block. The decoder repeatedly bilinear-upsamples the deeper feature,
projects it to the skip width with a 1x1 conv, and fuses with the skip
via the dual-channel attention block, halving width per stage. Five 1x1
heads (one per decoder level plus the bottleneck) emit full-resolution
probability maps; a fused head mixes their pre-sigmoid logits.

Ablation switches swap each novel block for a plain counterpart so the
contribution of every block can be measured in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import SSABlock
from .layers import BatchNorm2d, Conv2d, Module, Sequential, kaiming_normal
from .rdca import RDCA
from .tensor import Tensor
from .wavelet import FAMILIES, HWConv

DOWN_FACTOR = 16  # 4 pooling steps => input sides must divide by 16
HEAD_PRIOR_BIAS = -4.0  # initial head logit => foreground prior sigmoid(-4) ~ 0.018


@dataclass
class ModelConfig:
    channels: tuple = (32, 64, 128, 256, 512)
    hwconv_levels: int = 2
    m: int = 16
    family: str = "haar"
    deep_supervision: bool = True
    seed: int = 0
    use_hwconv: bool = True
    use_ssa: bool = True
    use_rdca: bool = True

    def validate(self):
        ch = tuple(self.channels)
        if len(ch) != 5:
            raise ValueError(f"need exactly 5 channel widths, got {len(ch)}")
        if any(b <= a for a, b in zip(ch, ch[1:])):
            raise ValueError(f"channel ladder must be strictly increasing: {ch}")
        if any(c % 2 for c in ch):
            raise ValueError("channel widths must be even (descriptor/chunk halving)")
        if self.hwconv_levels < 1:
            raise ValueError("hwconv_levels must be >= 1")
        if self.m < 2 or (self.m & (self.m - 1)):
            raise ValueError(f"window size must be a power of two >= 2, got {self.m}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown wavelet family {self.family!r}")


@dataclass
class TrainConfig:
    epochs: int = 400
    batch: int = 16
    lr0: float = 1e-3
    lr_min: float = 1e-5
    weight_decay: float = 5e-4
    crop: int = 256
    threshold: float = 0.5
    grad_clip: float = 5.0
    seed: int = 0

    def validate(self):
        for name in ("epochs", "batch", "lr0", "lr_min", "weight_decay", "crop", "grad_clip"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0, 1)")
        if self.lr_min > self.lr0:
            raise ValueError("lr_min cannot exceed lr0")


@dataclass
class SwanOutputs:
    per_stage: list  # 5 full-resolution probability maps, shallowest first
    fused: Tensor

    def all_maps(self):
        return [*self.per_stage, self.fused]


class _PlainStage(Module):
    """Conv-BN-relu stand-in used when the wavelet stage is ablated."""

    def __init__(self, cin, cout, rng, dtype=np.float32):
        super().__init__()
        self.conv = Conv2d(cin, cout, 3, rng, dtype=dtype)
        self.bn = BatchNorm2d(cout, dtype=dtype)

    def __call__(self, x):
        return T.relu(self.bn(self.conv(x)))


class _PlainFuse(Module):
    """Ungated concat-conv fusion used when the dual-channel block is ablated."""

    def __init__(self, c, rng, dtype=np.float32):
        super().__init__()
        self.c = c
        self.conv = Conv2d(2 * c, c // 2, 3, rng, dtype=dtype)
        self.bn = BatchNorm2d(c // 2, dtype=dtype)

    def __call__(self, u_up, f_skip):
        return T.relu(self.bn(self.conv(T.concat([u_up, f_skip], axis=1))))


LOGIT_CLAMP = 15.0


def _stable_logit(z: Tensor) -> Tensor:
    """Clamp head logits to +-15 with a straight-through gradient.

    sigmoid saturates beyond that range, so without the clamp a head
    that overshoots early loses its gradient entirely (sigmoid' ~ 0)
    and cross-entropy cannot pull it back. With the clamp the loss
    gradient through sigmoid stays bounded and non-vanishing, matching
    the behavior of a logits-space cross-entropy.
    """
    return T.clip_passthrough(z, -LOGIT_CLAMP, LOGIT_CLAMP)


class Swan(Module):
    def __init__(self, cfg: ModelConfig, dtype=np.float32):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        ch = tuple(cfg.channels)
        rng = np.random.default_rng(cfg.seed)

        def stage(cin, cout):
            if cfg.use_hwconv:
                return HWConv(cin, cout, cfg.hwconv_levels, rng,
                              family=cfg.family, dtype=dtype)
            return _PlainStage(cin, cout, rng, dtype=dtype)

        self.enc1 = stage(1, ch[0])
        self.enc2 = stage(ch[0], ch[1])
        self.enc3 = stage(ch[1], ch[2])
        self.enc4 = stage(ch[2], ch[3])
        self.enc5 = stage(ch[3], ch[4])

        if cfg.use_ssa:
            for k in range(5):
                setattr(self, f"ssa{k + 1}", SSABlock(ch[k], cfg.m, rng, dtype=dtype))

        # decoder: project the deeper feature to the skip width, then fuse
        deep_ch = [ch[4], ch[3] // 2, ch[2] // 2, ch[1] // 2]  # input widths at k=4..1
        for k, dc in zip((4, 3, 2, 1), deep_ch):
            setattr(self, f"up{k}", Conv2d(dc, ch[k - 1], 1, rng, dtype=dtype))
            fuse = (RDCA(ch[k - 1], rng, dtype=dtype) if cfg.use_rdca
                    else _PlainFuse(ch[k - 1], rng, dtype=dtype))
            setattr(self, f"fuse{k}", fuse)

        # supervision heads: 1x1 to a single logit channel per level.
        # Biases start negative so the initial foreground prior is low;
        # with heavily imbalanced masks this skips the long phase of
        # pushing every background pixel down from p=0.5.
        head_ch = [ch[0] // 2, ch[1] // 2, ch[2] // 2, ch[3] // 2, ch[4]]
        for k, hc in enumerate(head_ch, start=1):
            head = Conv2d(hc, 1, 1, rng, dtype=dtype)
            head.b.data[:] = HEAD_PRIOR_BIAS
            setattr(self, f"head{k}", head)
        self.head_cat = Conv2d(5, 1, 1, rng, dtype=dtype)
        self.head_cat.b.data[:] = HEAD_PRIOR_BIAS

    def _skip(self, k: int, f: Tensor) -> Tensor:
        if self.cfg.use_ssa:
            return getattr(self, f"ssa{k}")(f)
        return f

    def __call__(self, x: Tensor) -> SwanOutputs:
        n, c, h, w = x.shape
        if c != 1:
            raise ValueError(f"expected grayscale input (1 channel), got {c}")
        if h % DOWN_FACTOR or w % DOWN_FACTOR:
            raise ValueError(
                f"input {h}x{w} not divisible by {DOWN_FACTOR}; "
                f"pad to {h + (-h) % DOWN_FACTOR}x{w + (-w) % DOWN_FACTOR} first")

        e1 = self.enc1(x)
        e2 = self.enc2(T.maxpool2d(e1))
        e3 = self.enc3(T.maxpool2d(e2))
        e4 = self.enc4(T.maxpool2d(e3))
        e5 = self.enc5(T.maxpool2d(e4))

        skips = {1: e1, 2: e2, 3: e3, 4: e4}
        u5 = self._skip(5, e5)
        feats = {5: u5}
        deeper = u5
        for k in (4, 3, 2, 1):
            up = getattr(self, f"up{k}")(T.bilinear_upsample2x(deeper))
            deeper = getattr(self, f"fuse{k}")(up, self._skip(k, skips[k]))
            feats[k] = deeper

        logits = []
        for k in (1, 2, 3, 4, 5):
            z = getattr(self, f"head{k}")(feats[k])
            for _ in range(k - 1):
                z = T.bilinear_upsample2x(z)
            logits.append(_stable_logit(z))
        per_stage = [T.sigmoid(z) for z in logits]
        fused = T.sigmoid(_stable_logit(self.head_cat(T.concat(logits, axis=1))))
        return SwanOutputs(per_stage=per_stage, fused=fused)


def build_swan(cfg: ModelConfig, dtype=np.float32) -> Swan:
    return Swan(cfg, dtype=dtype)


def swan_forward(model: Swan, x: Tensor) -> SwanOutputs:
    return model(x)


def count_parameters(model: Module) -> int:
    return sum(p.size for _, p in model.named_parameters())


# -- losses -----------------------------------------------------------------

CLAMP = 1e-7


def bce_loss(p: Tensor, y: Tensor) -> Tensor:
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7]."""
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {y.shape}")
    if not np.isin(y.data, (0, 1)).all():
        raise ValueError("targets must be strictly binary (0/1)")
    pc = T.clip_passthrough(p, CLAMP, 1.0 - CLAMP)
    return -T.tmean(y * T.tlog(pc) + (1.0 - y) * T.tlog(1.0 - pc))


def deep_supervision_loss(outs: SwanOutputs, y: Tensor) -> Tensor:
    """Sum of the five per-level losses plus the fused-head loss."""
    total = bce_loss(outs.fused, y)
    for p in outs.per_stage:
        total = total + bce_loss(p, y)
    return total


# -- inference --------------------------------------------------------------


def infer(model: Swan, image: np.ndarray, threshold: float = 0.5):
    """Run one grayscale image; returns (binary mask, probability map)."""
    if image.ndim != 2:
        raise ValueError("infer expects a single (H, W) image")
    model.eval()
    with T.no_grad():
        x = Tensor(image[None, None].astype(np.float32))
        prob = model(x).fused.data[0, 0]
    return (prob >= threshold).astype(np.uint8), prob


# -- complexity -------------------------------------------------------------


def complexity_report(cfg: ModelConfig, h: int = 256, w: int = 256) -> dict:
    """Per-stage dense-conv flops (cin*cout*K^2*H*W) and the nested-transform
    cost model, alongside the true parameter count."""
    from .wavelet import flops_standard_conv, params_hwconv

    cfg.validate()
    ch = (1,) + tuple(cfg.channels)
    layers = []
    hh, ww = h, w
    for k in range(5):
        flops = flops_standard_conv(ch[k], ch[k + 1], 3, hh, ww)
        entry = {"stage": k + 1, "in": ch[k], "out": ch[k + 1],
                 "size": [hh, ww], "conv_flops": flops}
        if cfg.use_hwconv and not (hh % (1 << cfg.hwconv_levels)
                                   or ww % (1 << cfg.hwconv_levels)):
            entry["transform_cost"] = params_hwconv(ch[k], cfg.hwconv_levels, hh, ww)
        layers.append(entry)
        hh, ww = hh // 2, ww // 2
    model = build_swan(cfg)
    return {"layers": layers,
            "total_conv_flops": sum(e["conv_flops"] for e in layers),
            "parameters": count_parameters(model)}
