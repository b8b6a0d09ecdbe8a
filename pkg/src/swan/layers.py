"""Parameterized layers built on the autograd tensor ops.

A Module owns named parameters (and child modules); parameters() walks
the tree in a deterministic order, which the optimizer and the
checkpoint writer both rely on.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def kaiming_normal(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    std = np.sqrt(2.0 / fan_in)
    return rng.normal(0.0, std, size=shape).astype(dtype)


class Module:
    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}
        self.training = True

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and getattr(value, "requires_grad", False):
            self.__dict__.setdefault("_params", {})[name] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_children", {})[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True):
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def state_arrays(self):
        """Extra non-parameter state (e.g. BN running stats), name -> array."""
        out = {}
        for name, child in self._children.items():
            for k, v in child.state_arrays().items():
                out[f"{name}.{k}"] = v
        return out


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator,
                 pad: int | None = None, bias: bool = True, dtype=np.float32):
        super().__init__()
        self.k = k
        self.pad = (k - 1) // 2 if pad is None else pad
        self.w = Tensor(kaiming_normal(rng, (cout, cin, k, k), cin * k * k, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.w, self.b, stride=1, pad=self.pad)


class DepthwiseConv2d(Module):
    def __init__(self, c: int, k: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.w = Tensor(kaiming_normal(rng, (c, 1, k, k), k * k, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(c, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.depthwise_conv2d(x, self.w, self.b)


class Linear(Module):
    def __init__(self, din: int, dout: int, rng: np.random.Generator,
                 bias: bool = True, dtype=np.float32):
        super().__init__()
        self.w = Tensor(kaiming_normal(rng, (dout, din), din, dtype), requires_grad=True)
        self.b = Tensor(np.zeros(dout, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return T.linear(x, self.w, self.b)


class BatchNorm2d(Module):
    def __init__(self, c: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.gamma = Tensor(np.ones(c, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(c, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.batchnorm2d(x, self.gamma, self.beta, self.running_mean,
                             self.running_var, self.training,
                             momentum=self.momentum, eps=self.eps)

    def state_arrays(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class LayerNorm(Module):
    def __init__(self, c: int, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.gamma = Tensor(np.ones(c, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(c, dtype=dtype), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layernorm_lastdim(x, self.gamma, self.beta, eps=self.eps)


class Sequential(Module):
    def __init__(self, *mods):
        super().__init__()
        self.mods = list(mods)
        for i, m in enumerate(mods):
            setattr(self, f"m{i}", m)

    def __call__(self, x: Tensor) -> Tensor:
        for m in self.mods:
            x = m(x)
        return x
