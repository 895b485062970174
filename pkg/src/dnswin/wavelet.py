"""Single-level Haar analysis / synthesis on ``[B,] C x H x W`` tensors.

Analysis applies the four 2x2 filters unnormalised with stride 2; synthesis
carries the whole 1/4 factor, so ``haar_idwt(haar_dwt(x))`` is exact for
small-integer inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .tensor import Tensor

# rows: ll, lh, hl, hh; columns: taps a=(0,0), b=(0,1), c=(1,0), d=(1,1) of each 2x2 block
HAAR_FILTERS = np.array(
    [
        [1, 1, 1, 1],
        [-1, -1, 1, 1],
        [-1, 1, -1, 1],
        [1, -1, -1, 1],
    ],
    dtype=np.int8,
)


@dataclass
class SubbandSet:
    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor

    def __post_init__(self):
        shapes = {t.shape for t in self}
        if len(shapes) != 1:
            raise ValueError(f"subband shapes disagree: {[t.shape for t in self]}")

    def __iter__(self):
        return iter((self.ll, self.lh, self.hl, self.hh))

    @property
    def shape(self):
        return self.ll.shape


def _analysis(a, b, c, d):
    return np.stack([a + b + c + d, -a - b + c + d, -a + b - c + d, a - b - c + d])


def haar_dwt(x):
    """Split ``x`` into (ll, lh, hl, hh), each at half the spatial resolution."""
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError(f"haar_dwt needs even spatial extents, got {h}x{w}")
    xd = x.data
    a, b = xd[..., 0::2, 0::2], xd[..., 0::2, 1::2]
    c, d = xd[..., 1::2, 0::2], xd[..., 1::2, 1::2]
    stacked = _analysis(a, b, c, d)  # (4, ..., H/2, W/2)

    def backward(g):
        gll, glh, ghl, ghh = g
        out = np.empty(x.shape, dtype=g.dtype)
        out[..., 0::2, 0::2] = gll - glh - ghl + ghh
        out[..., 0::2, 1::2] = gll - glh + ghl - ghh
        out[..., 1::2, 0::2] = gll + glh - ghl - ghh
        out[..., 1::2, 1::2] = gll + glh + ghl + ghh
        return (out,)

    s = Tensor._from_op(stacked, (x,), backward, "haar_dwt")
    return SubbandSet(*(F.getitem(s, k) for k in range(4)))


def haar_idwt(s):
    """Reassemble a :class:`SubbandSet` into a map of twice the spatial extent."""
    ll, lh, hl, hh = s
    for t in (lh, hl, hh):
        if t.shape != ll.shape:
            raise ValueError(f"subband shape mismatch: {ll.shape} vs {t.shape}")
    L, A, B, D = ll.data, lh.data, hl.data, hh.data
    shape = ll.shape[:-2] + (2 * ll.shape[-2], 2 * ll.shape[-1])
    out = np.empty(shape, dtype=L.dtype)
    out[..., 0::2, 0::2] = (L - A - B + D) / 4
    out[..., 0::2, 1::2] = (L - A + B - D) / 4
    out[..., 1::2, 0::2] = (L + A - B - D) / 4
    out[..., 1::2, 1::2] = (L + A + B + D) / 4

    def backward(g):
        ga, gb = g[..., 0::2, 0::2], g[..., 0::2, 1::2]
        gc, gd = g[..., 1::2, 0::2], g[..., 1::2, 1::2]
        return tuple(_analysis(ga, gb, gc, gd) / 4)

    return Tensor._from_op(out, (ll, lh, hl, hh), backward, "haar_idwt")
