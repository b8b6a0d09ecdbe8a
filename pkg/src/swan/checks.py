"""Named gradient-check suites runnable from the CLI.

Every scope builds small float64 fixtures, runs the central
finite-difference comparison, and reports failures as strings so the
caller can decide the exit code.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import SSABlock
from .gradcheck import check_gradients
from .network import ModelConfig, build_swan, deep_supervision_loss
from .rdca import RDCA
from .tensor import Tensor
from .wavelet import HWConv

F64 = np.float64


def _rand(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True, dtype=F64)


def _tensor_op_cases(rng):
    x = _rand(rng, 2, 3, 6, 6)
    w = _rand(rng, 4, 3, 3, 3)
    b = _rand(rng, 4)
    dw = _rand(rng, 3, 1, 3, 3)
    a = _rand(rng, 5, 7)
    m = _rand(rng, 4, 7)
    g = _rand(rng, 3)
    bt = _rand(rng, 3)
    yield "conv2d", lambda: T.tsum(T.conv2d(x, w, b, pad=1) * T.conv2d(x, w, b, pad=1)), [x, w, b]
    yield "depthwise", lambda: T.tsum(T.depthwise_conv2d(x, dw) * T.depthwise_conv2d(x, dw)), [x, dw]
    yield "linear", lambda: T.tsum(T.relu(T.linear(a, m))), [a, m]
    yield "softmax", lambda: T.tsum(T.softmax_lastdim(a) * a), [a]
    yield "sigmoid-log", lambda: T.tsum(T.tlog(T.sigmoid(a) * 0.5 + 0.25)), [a]
    yield "layernorm", lambda: T.tsum(T.layernorm_lastdim(x.transpose(0, 2, 3, 1), g, bt)
                                      * x.transpose(0, 2, 3, 1)), [x, g, bt]
    yield "maxpool", lambda: T.tsum(T.maxpool2d(x) * T.maxpool2d(x)), [x]
    yield "upsample", lambda: T.tsum(T.bilinear_upsample2x(x) * T.bilinear_upsample2x(x)), [x]
    yield "matmul", lambda: T.tsum(T.matmul(a, T.transpose(m, (1, 0)))), [a, m]
    yield "pad-crop-shift", lambda: T.tsum(T.crop2d(T.cyclic_shift(T.pad2d(x, 1, 1, 1, 1), 1, -1), 6, 6) * x), [x]


def _block_cases(scope, rng):
    if scope == "hwconv":
        blk = HWConv(2, 3, 2, rng, dtype=F64)
        x = _rand(rng, 1, 2, 8, 8)
        yield "hwconv-l2", lambda: T.tsum(blk(x) * blk(x)), [x, *blk.parameters()]
    elif scope == "ssa":
        blk = SSABlock(4, 4, rng, dtype=F64)
        x = _rand(rng, 1, 4, 6, 6)
        yield "ssa-m4", lambda: T.tsum(blk(x) * blk(x)), [x, *blk.parameters()]
    elif scope == "rdca":
        blk = RDCA(4, rng, dtype=F64)
        u = _rand(rng, 2, 4, 5, 5)
        f = _rand(rng, 2, 4, 5, 5)
        yield "rdca", lambda: T.tsum(blk(u, f) * blk(u, f)), [u, f, *blk.parameters()]
    elif scope == "network":
        cfg = ModelConfig(channels=(2, 4, 6, 8, 10), hwconv_levels=1, m=2, seed=0)
        model = build_swan(cfg, dtype=F64)
        # batch of 2 keeps the deepest batchnorm well-posed at 32x32
        x = Tensor(rng.random((2, 1, 32, 32)), requires_grad=True, dtype=F64)
        y = Tensor((rng.random((2, 1, 32, 32)) > 0.9).astype(F64))
        params = [p for _, p in model.named_parameters()]

        def fwd():
            model.train()
            return deep_supervision_loss(model(x), y)

        yield "tiny-network", fwd, [x, *params]


def run_gradcheck_suite(scope: str, seed: int = 0,
                        rel_tol: float = 1e-3, max_coords: int = 8):
    """Run the named scope; returns a list of failure descriptions."""
    rng = np.random.default_rng(seed)
    if scope == "tensor-op":
        cases = _tensor_op_cases(rng)
        rel_tol = min(rel_tol, 1e-4)
    elif scope in ("hwconv", "ssa", "rdca", "network"):
        cases = _block_cases(scope, rng)
    else:
        raise ValueError(f"unknown gradcheck scope {scope!r}")
    # the full network composes batchnorms with tiny batch statistics, whose
    # curvature needs a finer finite-difference step
    eps = 1e-5 if scope == "network" else 1e-4
    failures = []
    for name, fwd, tensors in cases:
        try:
            check_gradients(fwd, tensors, eps=eps, rel_tol=rel_tol,
                            max_coords=max_coords, seed=seed)
        except AssertionError as e:
            failures.append(f"{name}: {e}")
    return failures
