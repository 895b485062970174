"""Window self-attention (WSA), its sliding variant (SWSA), and the relative position bias.

Internally the attention units work on channel-last maps ``(B, H, W, C)`` so
that layer norms and projections act on the last axis; the public
:func:`wsa` / :func:`swsa` take the ``[B,] C x H x W`` layout used elsewhere.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import functional as F
from .nn import Linear, Module, parameter
from .tensor import get_default_dtype

MASK_VALUE = -1e9


@dataclass(frozen=True)
class AttentionConfig:
    window_size: int
    heads: int
    channels: int
    shift: int = 0

    def __post_init__(self):
        if self.window_size < 1 or self.heads < 1 or self.channels < 1:
            raise ValueError(f"window size, heads and channels must be positive: {self}")
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.shift not in (0, self.window_size // 2):
            raise ValueError(f"shift must be 0 or {self.window_size // 2}, got {self.shift}")

    @property
    def head_dim(self):
        return self.channels // self.heads

    @property
    def tokens(self):
        return self.window_size**2

    def unshifted(self):
        return AttentionConfig(self.window_size, self.heads, self.channels, 0)


# ---------------------------------------------------------------------------
# partitioning
# ---------------------------------------------------------------------------


def _check_divisible(h, w, m):
    if h % m or w % m:
        raise ValueError(f"spatial extents {h}x{w} are not multiples of window size {m}")


def partition_hwc(x, m):
    """(B, H, W, C) -> (B, N, M*M, C), windows and tokens in row-major order."""
    b, h, w, c = x.shape
    _check_divisible(h, w, m)
    x = F.reshape(x, (b, h // m, m, w // m, m, c))
    x = F.transpose(x, (0, 1, 3, 2, 4, 5))
    return F.reshape(x, (b, (h // m) * (w // m), m * m, c))


def reverse_hwc(windows, m, h, w):
    """Inverse of :func:`partition_hwc`."""
    b, _, _, c = windows.shape
    x = F.reshape(windows, (b, h // m, w // m, m, m, c))
    x = F.transpose(x, (0, 1, 3, 2, 4, 5))
    return F.reshape(x, (b, h, w, c))


def _to_hwc(x):
    batched = x.ndim == 4
    if not batched:
        x = F.reshape(x, (1,) + x.shape)
    return F.transpose(x, (0, 2, 3, 1)), batched


def _from_hwc(x, batched):
    x = F.transpose(x, (0, 3, 1, 2))
    return x if batched else F.reshape(x, x.shape[1:])


def window_partition(x, m):
    """``[B,] C x H x W`` -> ``[B,] N x M^2 x C`` with N = HW / M^2."""
    xh, batched = _to_hwc(x)
    out = partition_hwc(xh, m)
    return out if batched else F.reshape(out, out.shape[1:])


def window_reverse(windows, m, h, w):
    """``[B,] N x M^2 x C`` -> ``[B,] C x H x W``."""
    batched = windows.ndim == 4
    if not batched:
        windows = F.reshape(windows, (1,) + windows.shape)
    return _from_hwc(reverse_hwc(windows, m, h, w), batched)


# ---------------------------------------------------------------------------
# relative position bias and shift mask
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def relative_position_index(m):
    """(M^2, M^2) index into a flattened (2M-1) x (2M-1) table.

    Entry (p1, p2) encodes the offset of token p1 relative to p2:
    ``(di + M - 1) * (2M - 1) + (dj + M - 1)``.
    """
    rows, cols = np.divmod(np.arange(m * m), m)
    di = rows[:, None] - rows[None, :]
    dj = cols[:, None] - cols[None, :]
    idx = (di + m - 1) * (2 * m - 1) + (dj + m - 1)
    idx.setflags(write=False)
    return idx


def realize_bias(table, m):
    """Expand an ``h x (2M-1) x (2M-1)`` bias table into the ``h x M^2 x M^2`` logit bias."""
    h = table.shape[0]
    flat = F.reshape(table, (h, (2 * m - 1) ** 2))
    return F.take(flat, relative_position_index(m), axis=1)


@functools.lru_cache(maxsize=None)
def build_shift_mask(h, w, m, s):
    """Additive logit mask (N, M^2, M^2) for windows over a map cyclically shifted by (-s, -s).

    Tokens that came from different contiguous regions of the unshifted map
    get ``MASK_VALUE``; all other pairs get 0.
    """
    _check_divisible(h, w, m)
    if s not in (0, m // 2):
        raise ValueError(f"shift must be 0 or floor(M/2) = {m // 2}, got {s}")
    n = (h // m) * (w // m)
    if s == 0:
        mask = np.zeros((n, m * m, m * m))
    else:
        band_r = (np.arange(h) >= h - s).astype(np.int64)
        band_c = (np.arange(w) >= w - s).astype(np.int64)
        region = band_r[:, None] * 2 + band_c[None, :]
        region = region.reshape(h // m, m, w // m, m).transpose(0, 2, 1, 3).reshape(n, m * m)
        mask = np.where(region[:, :, None] != region[:, None, :], MASK_VALUE, 0.0)
    mask.setflags(write=False)
    return mask


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------


class WindowAttention(Module):
    """Q/K/V/output projections and a per-head relative position bias table."""

    def __init__(self, cfg, rng):
        self.cfg = cfg
        c = cfg.channels
        bound = 1.0 / math.sqrt(c)
        self.q = parameter(rng.uniform(-bound, bound, size=(c, c)))
        self.k = parameter(rng.uniform(-bound, bound, size=(c, c)))
        self.v = parameter(rng.uniform(-bound, bound, size=(c, c)))
        self.proj = Linear(c, c, rng)
        m = cfg.window_size
        self.bias_table = parameter(np.zeros((cfg.heads, 2 * m - 1, 2 * m - 1), dtype=get_default_dtype()))

    def forward(self, x, shift=None):
        return attention_unit(x, self, shift=self.cfg.shift if shift is None else shift)


def window_attention(tokens, weights, mask=None, return_attn=False):
    """Multi-head attention inside each window.

    ``tokens`` is ``(B, N, T, C)``; ``mask`` an optional ``(N, T, T)`` constant.
    """
    cfg = weights.cfg
    b, n, t, c = tokens.shape
    if c != cfg.channels:
        raise ValueError(f"attention expects {cfg.channels} channels, got {c}")
    if t != cfg.tokens:
        raise ValueError(f"attention expects {cfg.tokens} tokens per window, got {t}")
    h, d = cfg.heads, cfg.head_dim

    def heads(w):
        y = F.linear(tokens, w, tag="proj")
        y = F.reshape(y, (b * n, t, h, d))
        return F.transpose(y, (0, 2, 1, 3))  # (G, h, T, d)

    q, k, v = heads(weights.q), heads(weights.k), heads(weights.v)
    logits = F.matmul(q, F.transpose(k, (0, 1, 3, 2)), tag="attn")
    logits = F.mul(logits, 1.0 / math.sqrt(d))
    logits = F.add_bias(logits, realize_bias(weights.bias_table, cfg.window_size))
    if mask is not None:
        logits = F.reshape(logits, (b, n, h, t, t))
        full = np.broadcast_to(np.asarray(mask, dtype=logits.dtype)[:, None], (n, h, t, t))
        logits = F.add_bias(logits, full)
        logits = F.reshape(logits, (b * n, h, t, t))
    attn = F.softmax(logits, axis=-1)
    out = F.matmul(attn, v, tag="attn")  # (G, h, T, d)
    out = F.reshape(F.transpose(out, (0, 2, 1, 3)), (b, n, t, c))
    out = weights.proj(out, tag="proj")
    return (out, attn) if return_attn else out


def attention_unit(x, weights, shift=0, return_attn=False):
    """(S)WSA on a channel-last map ``(B, H, W, C)``; ``shift`` 0 gives plain WSA."""
    m = weights.cfg.window_size
    _, hgt, wid, _ = x.shape
    _check_divisible(hgt, wid, m)
    if shift:
        x = F.roll(x, (-shift, -shift), (1, 2))
        mask = build_shift_mask(hgt, wid, m, shift)
    else:
        mask = None
    res = window_attention(partition_hwc(x, m), weights, mask=mask, return_attn=return_attn)
    out, attn = res if return_attn else (res, None)
    out = reverse_hwc(out, m, hgt, wid)
    if shift:
        out = F.roll(out, (shift, shift), (1, 2))
    return (out, attn) if return_attn else out


def wsa(x, cfg, weights):
    """Window self-attention on a ``[B,] C x H x W`` map."""
    if cfg.shift != 0:
        raise ValueError("wsa requires an unshifted config; use swsa")
    xh, batched = _to_hwc(x)
    return _from_hwc(attention_unit(xh, weights, shift=0), batched)


def swsa(x, cfg, weights):
    """Sliding-window self-attention: shift by (-s, -s), masked WSA, shift back."""
    xh, batched = _to_hwc(x)
    return _from_hwc(attention_unit(xh, weights, shift=cfg.shift), batched)


def flops_msa(h, w, c):
    """Multiply-accumulates of global multi-head self-attention over an H x W x C map."""
    hw = h * w
    return 4 * hw * c * c + 2 * hw * hw * c


def flops_wsa(h, w, c, m):
    """Multiply-accumulates of window self-attention with M x M windows."""
    hw = h * w
    return 4 * hw * c * c + 2 * m * m * hw * c
