"""Central finite-difference verification of analytic gradients.

All checks run in float64. Large tensors are spot-checked at a seeded
random subset of coordinates to keep composite-block checks tractable.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backprop


def finite_difference(f, t: Tensor, coords, eps: float = 1e-4):
    """Central differences of scalar f() w.r.t. t.data at flat coords."""
    flat = t.data.reshape(-1)
    grads = []
    for i in coords:
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f())
        flat[i] = orig - eps
        fm = float(f())
        flat[i] = orig
        grads.append((fp - fm) / (2.0 * eps))
    return np.array(grads)


def check_gradients(forward, tensors, eps: float = 1e-4, rel_tol: float = 1e-4,
                    max_coords: int = 16, seed: int = 0, atol_floor: float = 1e-5):
    """Compare backprop gradients of scalar forward() against central FD.

    forward() must rebuild the graph from `tensors` on every call (their
    .data arrays are perturbed in place). Returns the worst relative
    error; raises AssertionError past rel_tol.
    """
    for t in tensors:
        if t.data.dtype != np.float64:
            raise ValueError("gradcheck requires float64 tensors")
        t.zero_grad()
    loss = forward()
    backprop(loss)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, ga in zip(tensors, analytic):
        n = t.data.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        num = finite_difference(lambda: forward().data, t, coords, eps=eps)
        ana = ga.reshape(-1)[coords]
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), atol_floor)
        rel = np.abs(ana - num) / denom
        # near-zero pairs: fall back to an absolute comparison
        tiny = (np.abs(ana) < atol_floor) & (np.abs(num) < atol_floor)
        rel[tiny] = 0.0
        worst = max(worst, float(rel.max(initial=0.0)))
        if rel.max(initial=0.0) > rel_tol:
            i = int(np.argmax(rel))
            raise AssertionError(
                f"gradient mismatch (shape {t.shape}, coord {coords[i]}): "
                f"analytic {ana[i]:.6e} vs numeric {num[i]:.6e}, rel {rel[i]:.3e}"
            )
    return worst
