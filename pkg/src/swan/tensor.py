"""Dense tensor with reverse-mode autodiff on numpy arrays.

Every operator records a backward closure on the output tensor; backprop()
walks the graph in reverse topological order and accumulates gradients
(+=) into requires_grad leaves. Graph edges are released as they are
consumed, so one backward pass clears the tape.

Layout convention for images is N x C x H x W. Training runs float32;
float64 inputs propagate through every op unchanged (used by gradcheck).
"""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / metrics)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    # -- arithmetic sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, Tensor(np.asarray(-1.0, dtype=self.data.dtype)))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _make(data, parents, backward):
    """Build an op output, recording the edge only when grad is live."""
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    g = np.asarray(g, dtype=t.data.dtype)
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape):
    """Reduce a broadcasted gradient back to the operand's shape."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backprop(loss: Tensor):
    """Reverse-accumulate d(loss)/d(leaf) into every requires_grad leaf.

    The recorded graph is released node by node, so a second call on the
    same loss raises (empty tape).
    """
    if loss.data.shape != ():
        raise ValueError(f"backprop requires a scalar loss, got shape {loss.data.shape}")
    if loss._backward is None and not loss.requires_grad:
        raise ValueError("loss does not depend on any requires_grad tensor")
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.asarray(1.0, dtype=loss.data.dtype)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        if node._parents:
            # clear the tape as we go; intermediate grads are transient
            node._parents = ()
            node._backward = None
            if node is not loss:
                node.grad = None


# -- elementwise and reduction ops -----------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _make(data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data

    def bw(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(data, (a, b), bw)


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        _accum(x, np.broadcast_to(g, x.shape))

    return _make(data, (x,), bw)


def tmean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    data = x.data.mean(axis=axis, keepdims=keepdims)

    def bw(g):
        g = np.asarray(g) / count
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, axes)
        _accum(x, np.broadcast_to(g, x.shape))

    return _make(data, (x,), bw)


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0)

    def bw(g):
        _accum(x, g * (x.data > 0))

    return _make(data, (x,), bw)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign for overflow-free evaluation
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    out[~pos] = e / (1.0 + e)

    def bw(g):
        _accum(x, g * out * (1.0 - out))

    return _make(out, (x,), bw)


def tlog(x: Tensor) -> Tensor:
    data = np.log(x.data)

    def bw(g):
        _accum(x, g / x.data)

    return _make(data, (x,), bw)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    data = np.clip(x.data, lo, hi)

    def bw(g):
        _accum(x, g * ((x.data >= lo) & (x.data <= hi)))

    return _make(data, (x,), bw)


def clip_passthrough(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values but let gradients pass unchanged (straight-through).

    Used where the clamp only guards against log(0) in a loss; zeroing
    the gradient there would permanently silence saturated predictions.
    """
    data = np.clip(x.data, lo, hi)

    def bw(g):
        _accum(x, g)

    return _make(data, (x,), bw)


def softmax_lastdim(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        _accum(x, s * (g - dot))

    return _make(s, (x,), bw)


# -- shape ops --------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = x.data.reshape(shape)

    def bw(g):
        _accum(x, g.reshape(x.shape))

    return _make(data, (x,), bw)


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    data = x.data.transpose(axes)
    inv = np.argsort(axes)

    def bw(g):
        _accum(x, g.transpose(inv))

    return _make(data, (x,), bw)


def concat(tensors, axis=1) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _make(data, tuple(tensors), bw)


def chunk2(x: Tensor, axis=1):
    """Split into two equal halves along `axis`."""
    n = x.shape[axis]
    if n % 2 != 0:
        raise ValueError(f"chunk2 requires an even extent along axis {axis}, got {n}")
    h = n // 2

    def piece(lo, hi):
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(lo, hi)
        idx = tuple(idx)
        data = x.data[idx]

        def bw(g):
            full = np.zeros(x.shape, dtype=x.data.dtype)
            full[idx] = g
            _accum(x, full)

        return _make(data, (x,), bw)

    return piece(0, h), piece(h, n)


def slice_axis(x: Tensor, axis: int, lo: int, hi: int) -> Tensor:
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(lo, hi)
    idx = tuple(idx)
    data = x.data[idx]

    def bw(g):
        full = np.zeros(x.shape, dtype=x.data.dtype)
        full[idx] = g
        _accum(x, full)

    return _make(data, (x,), bw)


def apply_matrix(x: Tensor, mat: np.ndarray, axis: int) -> Tensor:
    """Contract a constant matrix along one axis: out[..p..] = sum_h mat[p,h] x[..h..]."""
    mat = np.asarray(mat, dtype=x.data.dtype)
    data = np.moveaxis(np.tensordot(mat, x.data, axes=([1], [axis])), 0, axis)

    def bw(g):
        _accum(x, np.moveaxis(np.tensordot(mat.T, g, axes=([1], [axis])), 0, axis))

    return _make(data, (x,), bw)


def replicate_pad_br(x: Tensor, pb: int, pr: int) -> Tensor:
    """Edge-replicate pad on the bottom/right of the spatial axes."""
    if pb == 0 and pr == 0:
        return x
    h, w = x.shape[-2], x.shape[-1]
    width = [(0, 0)] * (x.ndim - 2) + [(0, pb), (0, pr)]
    data = np.pad(x.data, width, mode="edge")

    def bw(g):
        gx = np.array(g[..., :h, :w])
        if pb:
            gx[..., -1, :] += g[..., h:, :w].sum(axis=-2)
        if pr:
            gx[..., :, -1] += g[..., :h, w:].sum(axis=-1)
        if pb and pr:
            gx[..., -1, -1] += g[..., h:, w:].sum(axis=(-2, -1))
        _accum(x, gx)

    return _make(data, (x,), bw)


def pad2d(x: Tensor, pt: int, pb: int, pl: int, pr: int) -> Tensor:
    """Zero-pad the last two axes (top, bottom, left, right)."""
    if pt == pb == pl == pr == 0:
        return x
    width = [(0, 0)] * (x.ndim - 2) + [(pt, pb), (pl, pr)]
    data = np.pad(x.data, width)
    h, w = x.shape[-2], x.shape[-1]

    def bw(g):
        _accum(x, g[..., pt:pt + h, pl:pl + w])

    return _make(data, (x,), bw)


def crop2d(x: Tensor, h: int, w: int, top: int = 0, left: int = 0) -> Tensor:
    """Take an h x w spatial crop starting at (top, left)."""
    if (top, left) == (0, 0) and (h, w) == (x.shape[-2], x.shape[-1]):
        return x
    data = x.data[..., top:top + h, left:left + w]

    def bw(g):
        full = np.zeros(x.shape, dtype=x.data.dtype)
        full[..., top:top + h, left:left + w] = g
        _accum(x, full)

    return _make(data, (x,), bw)


def cyclic_shift(x: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal roll of the two spatial axes (positive = down/right)."""
    data = np.roll(x.data, (dy, dx), axis=(-2, -1))

    def bw(g):
        _accum(x, np.roll(g, (-dy, -dx), axis=(-2, -1)))

    return _make(data, (x,), bw)


def gather_flat(table: Tensor, idx: np.ndarray) -> Tensor:
    """out[...] = table.flat[idx[...]]; grad scatter-adds into the table."""
    flat = table.data.reshape(-1)
    data = flat[idx]

    def bw(g):
        gt = np.zeros(flat.shape, dtype=table.data.dtype)
        np.add.at(gt, idx.reshape(-1), g.reshape(-1))
        _accum(table, gt.reshape(table.shape))

    return _make(data, (table,), bw)


# -- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul; leading batch dims of a and b must agree exactly."""
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    data = np.matmul(a.data, b.data)

    def bw(g):
        _accum(a, np.matmul(g, np.swapaxes(b.data, -1, -2)))
        _accum(b, np.matmul(np.swapaxes(a.data, -1, -2), g))

    return _make(data, (a, b), bw)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """out[..., j] = sum_i x[..., i] * w[j, i] + b[j]."""
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"linear dims disagree: x {x.shape} vs w {w.shape}")
    data = x.data @ w.data.T
    if b is not None:
        data = data + b.data

    def bw(g):
        _accum(x, g @ w.data)
        gm = g.reshape(-1, g.shape[-1])
        xm = x.data.reshape(-1, x.shape[-1])
        _accum(w, gm.T @ xm)
        if b is not None:
            _accum(b, gm.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _make(data, parents, bw)


# -- convolution family -----------------------------------------------------


def _patch_view(xp: np.ndarray, k: int, stride: int, ho: int, wo: int):
    """Strided (N, C, K, K, Ho, Wo) window view of a padded input."""
    n, c, hp, wp = xp.shape
    sn, sc, sh, sw = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, k, k, ho, wo),
        strides=(sn, sc, sh, sw, sh * stride, sw * stride),
        writeable=False,
    )


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation with zero padding; w is (Cout, Cin, K, K)."""
    n, cin, h, wid = x.shape
    cout, cin_w, k, k2 = w.shape
    if k != k2:
        raise ValueError("conv2d expects square kernels")
    if k % 2 != 1:
        raise ValueError(f"conv2d kernel size must be odd, got {k}")
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input has {cin}, weight expects {cin_w}")
    if stride < 1 or pad < 0:
        raise ValueError("conv2d requires stride >= 1 and pad >= 0")
    if h + 2 * pad < k or wid + 2 * pad < k:
        raise ValueError("conv2d input smaller than kernel after padding")
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wid + 2 * pad - k) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    view = _patch_view(xp, k, stride, ho, wo)
    out = np.tensordot(w.data, view, axes=([1, 2, 3], [1, 2, 3]))  # (Cout, N, Ho, Wo)
    out = out.transpose(1, 0, 2, 3)
    if b is not None:
        out = out + b.data.reshape(1, cout, 1, 1)
    out = np.ascontiguousarray(out)

    def bw(g):
        _accum(w, np.tensordot(g, view, axes=([0, 2, 3], [0, 4, 5])))
        if b is not None:
            _accum(b, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            # dcols[n,c,k,l,i,j] = sum_o w[o,c,k,l] g[n,o,i,j]
            dcols = np.tensordot(g, w.data, axes=([1], [0]))  # (N, Ho, Wo, Cin, K, K)
            gxp = np.zeros_like(xp)
            for ky in range(k):
                for kx in range(k):
                    gxp[:, :, ky:ky + ho * stride:stride, kx:kx + wo * stride:stride] += (
                        dcols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
                    )
            if pad:
                gxp = gxp[:, :, pad:pad + h, pad:pad + wid]
            _accum(x, gxp)

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, bw)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, pad: int | None = None) -> Tensor:
    """Per-channel KxK conv; w is (C, 1, K, K), spatial size preserved."""
    n, c, h, wid = x.shape
    cw, one, k, k2 = w.shape
    if k != k2 or one != 1:
        raise ValueError("depthwise weight must be (C, 1, K, K)")
    if k % 2 != 1:
        raise ValueError(f"depthwise kernel size must be odd, got {k}")
    if cw != c:
        raise ValueError(f"depthwise channel mismatch: input {c} vs weight {cw}")
    if pad is None:
        pad = (k - 1) // 2
    if pad != (k - 1) // 2:
        raise ValueError("depthwise conv requires pad == (K-1)//2")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    view = _patch_view(xp, k, 1, h, wid)
    out = np.einsum("ncklij,ckl->ncij", view, w.data[:, 0], optimize=True)
    if b is not None:
        out = out + b.data.reshape(1, c, 1, 1)

    def bw(g):
        _accum(w, np.einsum("ncklij,ncij->ckl", view, g, optimize=True)[:, None])
        if b is not None:
            _accum(b, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for ky in range(k):
                for kx in range(k):
                    gxp[:, :, ky:ky + h, kx:kx + wid] += g * w.data[:, 0, ky, kx].reshape(1, c, 1, 1)
            _accum(x, gxp[:, :, pad:pad + h, pad:pad + wid])

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, bw)


# -- normalization ----------------------------------------------------------


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                running_var: np.ndarray, training: bool, momentum: float = 0.1,
                eps: float = 1e-5) -> Tensor:
    n, c, h, w = x.shape
    if training:
        if n * h * w < 2:
            raise ValueError("batchnorm training mode needs at least 2 values per channel")
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * (n * h * w) / max(n * h * w - 1, 1)
    else:
        mean = running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.reshape(1, c, 1, 1)) * inv.reshape(1, c, 1, 1)
    out = gamma.data.reshape(1, c, 1, 1) * xhat + beta.data.reshape(1, c, 1, 1)

    def bw(g):
        _accum(beta, g.sum(axis=(0, 2, 3)))
        _accum(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gx = g * gamma.data.reshape(1, c, 1, 1)
            if training:
                m = n * h * w
                s1 = gx.sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
                s2 = (gx * xhat).sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
                _accum(x, inv.reshape(1, c, 1, 1) / m * (m * gx - s1 - xhat * s2))
            else:
                _accum(x, gx * inv.reshape(1, c, 1, 1))

    return _make(out, (x, gamma, beta), bw)


def layernorm_lastdim(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = gamma.data * xhat + beta.data
    m = x.shape[-1]

    def bw(g):
        red = tuple(range(g.ndim - 1))
        _accum(beta, g.sum(axis=red))
        _accum(gamma, (g * xhat).sum(axis=red))
        if x.requires_grad:
            gx = g * gamma.data
            s1 = gx.sum(axis=-1, keepdims=True)
            s2 = (gx * xhat).sum(axis=-1, keepdims=True)
            _accum(x, inv / m * (m * gx - s1 - xhat * s2))

    return _make(out, (x, gamma, beta), bw)


# -- pooling and resampling -------------------------------------------------


def maxpool2d(x: Tensor, k: int = 2, stride: int = 2) -> Tensor:
    if (k, stride) != (2, 2):
        raise ValueError("only 2x2 stride-2 maxpool is supported")
    n, c, h, w = x.shape
    if h % 2 != 0 or w % 2 != 0:
        raise ValueError(f"maxpool2d requires even spatial extents, got {h}x{w}")
    blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // 2, w // 2, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gb = np.zeros_like(blocks)
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        gx = gb.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        _accum(x, gx)

    return _make(out, (x,), bw)


def global_avgpool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def bw(g):
        _accum(x, np.broadcast_to(g / (h * w), x.shape))

    return _make(out, (x,), bw)


_UPSAMPLE_CACHE: dict = {}


def _upsample_matrix(n: int, dtype) -> np.ndarray:
    """Dense (2n, n) bilinear interpolation matrix, align_corners=False."""
    key = (n, np.dtype(dtype).name)
    mat = _UPSAMPLE_CACHE.get(key)
    if mat is None:
        mat = np.zeros((2 * n, n), dtype=dtype)
        for i in range(2 * n):
            src = (i + 0.5) / 2.0 - 0.5
            i0 = int(np.floor(src))
            f = src - i0
            i0c = min(max(i0, 0), n - 1)
            i1c = min(max(i0 + 1, 0), n - 1)
            mat[i, i0c] += 1.0 - f
            mat[i, i1c] += f
        _UPSAMPLE_CACHE[key] = mat
    return mat


def bilinear_upsample2x(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    uh = _upsample_matrix(h, x.data.dtype)
    uw = _upsample_matrix(w, x.data.dtype)
    out = np.einsum("ph,nchw,qw->ncpq", uh, x.data, uw, optimize=True)

    def bw(g):
        _accum(x, np.einsum("ph,ncpq,qw->nchw", uh, g, uw, optimize=True))

    return _make(out, (x,), bw)
