"""Window self-attention, its shifted masked variant, and the full
attention block applied to skip features.

Tokens are the pixels of M x M windows in row-major order. The shifted
pass rolls the feature map by (-M/2, -M/2), so windows straddle the old
boundaries; wrapped-around regions are kept from attending to each other
with additive -1e9 mask entries. A learnable table indexed by relative
displacement biases the shifted attention logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Conv2d, DepthwiseConv2d, LayerNorm, Linear, Module
from .tensor import Tensor

NEG_INF = -1e9


@dataclass
class WindowGrid:
    n: int
    c: int
    h: int
    w: int
    m: int
    pad_h: int
    pad_w: int

    @property
    def nh(self):
        return (self.h + self.pad_h) // self.m

    @property
    def nw(self):
        return (self.w + self.pad_w) // self.m

    @property
    def num_windows(self):
        return self.nh * self.nw


def window_partition(x: Tensor, m: int) -> tuple[Tensor, WindowGrid]:
    """(N,C,H,W) -> (N*nW, M*M, C) row-major tokens; zero-pads to multiples of M."""
    if m <= 0:
        raise ValueError(f"window size must be positive, got {m}")
    n, c, h, w = x.shape
    pad_h = (-h) % m
    pad_w = (-w) % m
    grid = WindowGrid(n, c, h, w, m, pad_h, pad_w)
    xp = T.pad2d(x, 0, pad_h, 0, pad_w)
    t = T.reshape(xp, (n, c, grid.nh, m, grid.nw, m))
    t = T.transpose(t, (0, 2, 4, 3, 5, 1))  # N, nh, nw, my, mx, C
    return T.reshape(t, (n * grid.num_windows, m * m, c)), grid


def window_reverse(tokens: Tensor, grid: WindowGrid) -> Tensor:
    """Inverse of window_partition; crops the padding back off."""
    m = grid.m
    t = T.reshape(tokens, (grid.n, grid.nh, grid.nw, m, m, grid.c))
    t = T.transpose(t, (0, 5, 1, 3, 2, 4))
    t = T.reshape(t, (grid.n, grid.c, grid.h + grid.pad_h, grid.w + grid.pad_w))
    return T.crop2d(t, grid.h, grid.w)


def relative_bias_index(m: int) -> np.ndarray:
    """(M^2, M^2) flat indices into a (2M-1)x(2M-1) displacement table.

    Entry (i, j) points at table[dx + M - 1, dy + M - 1] where pixel j
    sits dx to the right of and dy below pixel i.
    """
    ys, xs = np.divmod(np.arange(m * m), m)
    dx = xs[None, :] - xs[:, None]
    dy = ys[None, :] - ys[:, None]
    return (dx + m - 1) * (2 * m - 1) + (dy + m - 1)


def attention_mask(h: int, w: int, m: int, shift: int) -> np.ndarray | None:
    """(nW, M^2, M^2) additive mask; None when nothing needs masking.

    Assumes the h x w map is zero-padded up to multiples of M and, when
    shift > 0, cyclically rolled by (-shift, -shift) AFTER padding.
    Blocks attention across wrapped region boundaries and onto padded
    tokens.
    """
    hp, wp = h + (-h) % m, w + (-w) % m
    if shift == 0 and hp == h and wp == w:
        return None
    # region labels live in post-shift coordinates: the last `shift` rows
    # and columns hold wrapped content, the preceding M-shift hold the
    # tail of the unwrapped image
    ids = np.zeros((hp, wp), dtype=np.int64)
    if shift > 0:
        bounds = (slice(0, -m), slice(-m, -shift), slice(-shift, None))
        v = 0
        for sy in bounds:
            for sx in bounds:
                ids[sy, sx] = v
                v += 1
    # padding was applied before the roll, so its marker rolls with it
    padded = np.zeros((hp, wp), dtype=bool)
    padded[h:, :] = True
    padded[:, w:] = True
    if shift > 0:
        padded = np.roll(padded, (-shift, -shift), axis=(0, 1))
    ids[padded] = -1
    wins = ids.reshape(hp // m, m, wp // m, m).transpose(0, 2, 1, 3).reshape(-1, m * m)
    same = wins[:, :, None] == wins[:, None, :]
    # never mask a padded query's whole row: padded rows are cropped anyway
    same |= (wins[:, :, None] == -1)
    return np.where(same, 0.0, NEG_INF)


class WindowAttention(Module):
    """Scaled dot-product attention inside windows, optional bias table."""

    def __init__(self, c: int, m: int, rng: np.random.Generator,
                 heads: int = 1, with_bias_table: bool = True, dtype=np.float32):
        super().__init__()
        if c % heads:
            raise ValueError(f"channels {c} not divisible by {heads} heads")
        self.c = c
        self.m = m
        self.heads = heads
        self.wq = Linear(c, c, rng, bias=False, dtype=dtype)
        self.wk = Linear(c, c, rng, bias=False, dtype=dtype)
        self.wv = Linear(c, c, rng, bias=False, dtype=dtype)
        if with_bias_table:
            self.bias_table = Tensor(np.zeros((2 * m - 1, 2 * m - 1), dtype=dtype),
                                     requires_grad=True)
            self._bias_idx = relative_bias_index(m)

    def __call__(self, tokens: Tensor, use_bias: bool = False,
                 mask: np.ndarray | None = None) -> Tensor:
        b, l, c = tokens.shape
        if c != self.c:
            raise ValueError(f"expected {self.c} channels, got {c}")
        h = self.heads
        d = c // h
        q = self.wq(tokens)
        k = self.wk(tokens)
        v = self.wv(tokens)

        def split_heads(t):
            t = T.reshape(t, (b, l, h, d))
            return T.transpose(t, (0, 2, 1, 3))  # b, h, l, d

        q, k, v = split_heads(q), split_heads(k), split_heads(v)
        logits = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * Tensor(
            np.asarray(1.0 / np.sqrt(d), dtype=tokens.dtype))
        if use_bias:
            bias = T.gather_flat(self.bias_table, self._bias_idx)  # (L, L)
            logits = logits + bias
        if mask is not None:
            nw = mask.shape[0]
            if b % nw or mask.shape[1:] != (l, l):
                raise ValueError(f"mask shape {mask.shape} incompatible with tokens {tokens.shape}")
            logits = T.reshape(logits, (b // nw, nw, h, l, l))
            logits = logits + Tensor(mask[:, None].astype(tokens.data.dtype))
            logits = T.reshape(logits, (b, h, l, l))
        attn = T.softmax_lastdim(logits)
        out = T.matmul(attn, v)  # b, h, l, d
        out = T.transpose(out, (0, 2, 1, 3))
        return T.reshape(out, (b, l, c))


class TokenMlp(Module):
    """Per-token two-layer MLP with expansion ratio 2."""

    def __init__(self, c: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.fc1 = Linear(c, 2 * c, rng, dtype=dtype)
        self.fc2 = Linear(2 * c, c, rng, dtype=dtype)

    def __call__(self, t: Tensor) -> Tensor:
        return self.fc2(T.relu(self.fc1(t)))


class SSABlock(Module):
    """Attention block applied to each skip feature and the bottleneck.

    Pipeline: plain window attention, MLP, shifted masked+biased
    attention, MLP (all with pre-norm and residuals); then 1x1 conv ->
    channel chunk -> parallel depthwise 3x3/5x5 -> concat -> 1x1 conv,
    gated by a sigmoid channel descriptor of its own global average.
    """

    def __init__(self, c: int, m: int, rng: np.random.Generator,
                 heads: int = 1, dtype=np.float32):
        super().__init__()
        if c % 2:
            raise ValueError("SSABlock needs an even channel count (channel chunk)")
        self.c = c
        self.m = m
        self.shift = m // 2
        self.norm1 = LayerNorm(c, dtype=dtype)
        self.attn_plain = WindowAttention(c, m, rng, heads=heads,
                                          with_bias_table=False, dtype=dtype)
        self.norm2 = LayerNorm(c, dtype=dtype)
        self.mlp1 = TokenMlp(c, rng, dtype=dtype)
        self.norm3 = LayerNorm(c, dtype=dtype)
        self.attn_shift = WindowAttention(c, m, rng, heads=heads, dtype=dtype)
        self.norm4 = LayerNorm(c, dtype=dtype)
        self.mlp2 = TokenMlp(c, rng, dtype=dtype)
        self.mix_in = Conv2d(c, c, 1, rng, dtype=dtype)
        self.dw3 = DepthwiseConv2d(c // 2, 3, rng, dtype=dtype)
        self.dw5 = DepthwiseConv2d(c // 2, 5, rng, dtype=dtype)
        self.mix_out = Conv2d(c, c, 1, rng, dtype=dtype)
        self.gate = Conv2d(c, c, 1, rng, dtype=dtype)

    def _token_step(self, x: Tensor, fn) -> Tensor:
        """Apply fn on an (N,H,W,C) token view and fold back to NCHW."""
        t = T.transpose(x, (0, 2, 3, 1))
        t = fn(t)
        return T.transpose(t, (0, 3, 1, 2))

    def __call__(self, x: Tensor) -> Tensor:
        m = self.m
        n, c, h, w = x.shape

        # window attention with residual
        win, grid = window_partition(x, m)
        mask0 = attention_mask(h, w, m, 0)
        y = self.attn_plain(self.norm1(win), use_bias=False, mask=mask0)
        x = x + window_reverse(y, grid)

        x = x + self._token_step(x, lambda t: self.mlp1(self.norm2(t)))

        # shifted attention with displacement bias and wrap mask;
        # pad to window multiples first so the roll and the mask agree
        s = self.shift
        xp = T.pad2d(x, 0, (-h) % m, 0, (-w) % m)
        xs = T.cyclic_shift(xp, -s, -s) if s else xp
        win, grid = window_partition(xs, m)
        masks = attention_mask(h, w, m, s)
        y = window_reverse(self.attn_shift(self.norm3(win), use_bias=True, mask=masks), grid)
        y = T.cyclic_shift(y, s, s) if s else y
        x = x + T.crop2d(y, h, w)

        x = x + self._token_step(x, lambda t: self.mlp2(self.norm4(t)))

        # dual-kernel depthwise mixing
        u = self.mix_in(x)
        a, b = T.chunk2(u, axis=1)
        u = self.mix_out(T.concat([self.dw3(a), self.dw5(b)], axis=1))

        # channel gate on the block's own global description
        g = T.sigmoid(self.gate(T.global_avgpool(u)))
        return u * g
