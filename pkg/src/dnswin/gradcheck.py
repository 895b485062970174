"""Central finite-difference gradient checking (float64)."""

from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Tensor, default_dtype


def numeric_grad(f, t, step=1e-5, coords=None):
    """Central differences of scalar ``f()`` w.r.t. entries of ``t.data`` (modified in place and restored)."""
    flat = t.data.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    out = {}
    for i in idx:
        orig = flat[i]
        flat[i] = orig + step
        fp = float(f().data)
        flat[i] = orig - step
        fm = float(f().data)
        flat[i] = orig
        out[i] = (fp - fm) / (2 * step)
    return out


def max_relative_error(f, inputs, step=1e-5, max_coords=40, rng=None):
    """Largest gradient discrepancy over ``inputs``, scaled by the gradient magnitude.

    For each input, up to ``max_coords`` randomly chosen entries are checked;
    the error is ``max |analytic - numeric| / max(max |numeric|, max |analytic|)``
    over those entries.  ``f`` takes no arguments and returns a scalar Tensor.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for t in inputs:
        t.grad = None
    f().backward()
    worst = 0.0
    for t in inputs:
        if t.grad is None:
            raise AssertionError(f"input {t.shape} received no gradient")
        n = t.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        num = numeric_grad(f, t, step, coords)
        ana = t.grad.reshape(-1)
        diff = max(abs(ana[i] - num[i]) for i in coords)
        scale = max(max(abs(num[i]) for i in coords), float(np.abs(ana[coords]).max()), 1e-12)
        worst = max(worst, diff / scale)
    return worst


def projected(fn, out_shape, rng):
    """Wrap a tensor-valued ``fn`` as ``sum(fn() * G)`` with a fixed random ``G``."""
    g = rng.uniform(-1.0, 1.0, size=out_shape)

    def f():
        return F.sum(F.mul(fn(), g))

    return f


def rand64(rng, shape, low=-1.0, high=1.0, requires_grad=True):
    with default_dtype(np.float64):
        return Tensor(rng.uniform(low, high, size=shape), requires_grad=requires_grad)
