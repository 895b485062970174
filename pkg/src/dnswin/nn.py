"""Parameter containers and the small set of layers the network is built from."""

from __future__ import annotations

import math

import numpy as np

from . import functional as F
from .tensor import Tensor, get_default_dtype


def parameter(data):
    return Tensor(data, requires_grad=True)


def uniform_(rng, shape, bound):
    return parameter(rng.uniform(-bound, bound, size=shape))


class Module:
    """Base class: parameters are discovered from instance attributes in definition order."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            if name not in state:
                continue
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: stored shape {arr.shape} != parameter shape {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)


class Linear(Module):
    def __init__(self, d_in, d_out, rng, bias=True):
        bound = 1.0 / math.sqrt(d_in)
        self.weight = uniform_(rng, (d_in, d_out), bound)
        self.bias = uniform_(rng, (d_out,), bound) if bias else None

    def forward(self, x, tag="linear"):
        return F.linear(x, self.weight, self.bias, tag=tag)


class Conv2d(Module):
    def __init__(self, c_in, c_out, k, rng, stride=1, pad=None):
        if k not in (1, 2, 3, 4):
            raise ValueError(f"kernel size must be 1..4, got {k}")
        bound = 1.0 / math.sqrt(c_in * k * k)
        self.weight = uniform_(rng, (c_out, c_in, k, k), bound)
        self.bias = uniform_(rng, (c_out,), bound)
        self.stride = stride
        self.pad = (k - 1) // 2 if pad is None else pad

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class ConvTranspose2d(Module):
    """k x k transposed convolution with stride k (doubles extents for k=2)."""

    def __init__(self, c_in, c_out, k, rng):
        bound = 1.0 / math.sqrt(c_out * k * k)
        self.weight = uniform_(rng, (c_in, c_out, k, k), bound)
        self.bias = uniform_(rng, (c_out,), bound)
        self.k = k

    def forward(self, x):
        return F.conv_transpose2d(x, self.weight, self.bias, stride=self.k)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        dtype = get_default_dtype()
        self.weight = parameter(np.ones(dim, dtype=dtype))
        self.bias = parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x):
        return F.layer_norm(x, self.weight, self.bias, axis=-1, eps=self.eps)


class MLP(Module):
    """Two linear layers with GELU in between."""

    def __init__(self, dim, ratio, rng):
        hidden = int(round(dim * ratio))
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x):
        return self.fc2(F.gelu(self.fc1(x)))
