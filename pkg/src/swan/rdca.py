"""Residual dual-channel fusion of upsampled deep features with
attention-processed skip features.

Both inputs are reduced to length-C/2 channel descriptors (1x1 conv ->
global average pool -> linear); the summed descriptors, squashed by a
sigmoid, gate the half-width projection of the skip path. The gated skip
is concatenated with the deep path and fused by a 3x3 conv + BN + relu
down to C/2 channels, halving the decoder width per stage.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .layers import BatchNorm2d, Conv2d, Linear, Module
from .tensor import Tensor


class ChannelDescriptor(Module):
    """(N,C,H,W) -> (N,C/2) summary: 1x1 conv to C/2, pool, flatten, linear."""

    def __init__(self, c: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        if c % 2:
            raise ValueError(f"channel descriptor needs an even channel count, got {c}")
        self.halve = Conv2d(c, c // 2, 1, rng, dtype=dtype)
        self.lin = Linear(c // 2, c // 2, rng, dtype=dtype)

    def project(self, f: Tensor) -> Tensor:
        """The C/2-channel spatial projection (shared with the gate target)."""
        return self.halve(f)

    def __call__(self, f: Tensor) -> Tensor:
        p = T.global_avgpool(self.project(f))
        flat = T.reshape(p, (f.shape[0], f.shape[1] // 2))
        return self.lin(flat)


class RDCA(Module):
    def __init__(self, c: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.c = c
        self.desc_deep = ChannelDescriptor(c, rng, dtype=dtype)
        self.desc_skip = ChannelDescriptor(c, rng, dtype=dtype)
        self.fuse = Conv2d(c + c // 2, c // 2, 3, rng, dtype=dtype)
        self.fuse_bn = BatchNorm2d(c // 2, dtype=dtype)

    def __call__(self, u_up: Tensor, f_skip: Tensor) -> Tensor:
        if u_up.shape != f_skip.shape:
            raise ValueError(
                f"deep and skip features must align, got {u_up.shape} vs {f_skip.shape}")
        if u_up.shape[1] != self.c:
            raise ValueError(f"expected {self.c} channels, got {u_up.shape[1]}")
        n, c, h, w = u_up.shape
        d = self.desc_deep(u_up) + self.desc_skip(f_skip)  # (N, C/2)
        weights = T.sigmoid(d)
        skip_half = self.desc_skip.project(f_skip)  # (N, C/2, H, W)
        gated = T.relu(skip_half * T.reshape(weights, (n, c // 2, 1, 1)))
        fused = self.fuse(T.concat([u_up, gated], axis=1))
        return T.relu(self.fuse_bn(fused))


def channel_descriptor(f: Tensor, path: ChannelDescriptor) -> Tensor:
    return path(f)


def rdca_fuse(u_up: Tensor, f_skip: Tensor, block: RDCA) -> Tensor:
    return block(u_up, f_skip)
