"""Differentiable primitives.

Shapes are explicit: binary elementwise ops need identical shapes (Python
scalars and same-shape constant arrays are allowed as the other operand);
the only broadcasting op is :func:`add_bias`, which adds a tensor matching
the trailing axes of its input.
"""

from __future__ import annotations

import builtins
import math

import numpy as np
from scipy.special import erf

from .tensor import Tensor, count_macs

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _op(data, parents, backward, name):
    return Tensor._from_op(data, parents, backward, name)


def _check_same(a, b, op):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _norm_axis(axis, ndim):
    if not -ndim <= axis < ndim:
        raise ValueError(f"axis {axis} out of range for a {ndim}-d tensor")
    return axis % ndim


def _as_const(c, like):
    """Scalar -> Python float (keeps float32); array -> same-dtype array."""
    if isinstance(c, (int, float, np.number)):
        return float(c)
    arr = np.asarray(c, dtype=like.dtype)
    if arr.shape != like.shape:
        raise ValueError(f"constant operand shape {arr.shape} != tensor shape {like.shape}")
    return arr


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b):
    if not isinstance(a, Tensor):
        a, b = b, a
    if isinstance(b, Tensor):
        _check_same(a, b, "add")
        return _op(a.data + b.data, (a, b), lambda g: (g, g), "add")
    c = _as_const(b, a)
    return _op(a.data + c, (a,), lambda g: (g,), "add_const")


def sub(a, b):
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        _check_same(a, b, "sub")
        return _op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")
    if isinstance(a, Tensor):
        return add(a, -_as_const(b, a))
    c = _as_const(a, b)
    return _op(c - b.data, (b,), lambda g: (-g,), "rsub_const")


def mul(a, b):
    if not isinstance(a, Tensor):
        a, b = b, a
    if isinstance(b, Tensor):
        _check_same(a, b, "mul")
        ad, bd = a.data, b.data
        return _op(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")
    c = _as_const(b, a)
    return _op(a.data * c, (a,), lambda g: (g * c,), "mul_const")


def reciprocal(x):
    y = 1.0 / x.data
    return _op(y, (x,), lambda g: (-g * y * y,), "reciprocal")


def power(x, p):
    p = float(p)
    xd = x.data
    return _op(xd**p, (x,), lambda g: (g * p * xd ** (p - 1.0),), "power")


def sqrt(x):
    y = np.sqrt(x.data)
    return _op(y, (x,), lambda g: (g * 0.5 / y,), "sqrt")


def abs(x):  # noqa: A001
    s = np.sign(x.data)
    return _op(np.abs(x.data), (x,), lambda g: (g * s,), "abs")


def exp(x):
    y = np.exp(x.data)
    return _op(y, (x,), lambda g: (g * y,), "exp")


def add_bias(x, b):
    """x + b where ``b.shape`` equals the trailing axes of ``x.shape``."""
    if b.ndim > x.ndim or x.shape[x.ndim - b.ndim :] != b.shape:
        raise ValueError(f"add_bias: bias {b.shape} does not match trailing axes of {x.shape}")
    lead = tuple(range(x.ndim - b.ndim))

    def backward(g):
        return g, (g.sum(axis=lead) if lead else g)

    if isinstance(b, Tensor):
        return _op(x.data + b.data, (x, b), backward, "add_bias")
    bd = np.asarray(b, dtype=x.dtype)
    return _op(x.data + bd, (x,), lambda g: (g,), "add_bias_const")


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------


def sum(x, axis=None):  # noqa: A001
    shape = x.shape
    if axis is None:
        return _op(np.asarray(x.data.sum(), dtype=x.dtype), (x,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")
    axis = _norm_axis(axis, x.ndim)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _op(x.data.sum(axis=axis), (x,), backward, "sum")


def mean(x, axis=None):
    n = x.size if axis is None else x.shape[_norm_axis(axis, x.ndim)]
    return mul(sum(x, axis), 1.0 / n)


def reshape(x, shape):
    old = x.shape
    return _op(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x, axes=None):
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return _op(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def getitem(x, idx):
    shape = x.shape
    parts = idx if isinstance(idx, tuple) else (idx,)
    basic = all(isinstance(p, (slice, int, type(Ellipsis))) for p in parts)

    def backward(g):
        full = np.zeros(shape, dtype=g.dtype)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _op(np.array(x.data[idx]), (x,), backward, "getitem")


def take(x, index, axis):
    """Gather along ``axis`` with an integer index array (entries may repeat)."""
    axis = _norm_axis(axis, x.ndim)
    index = np.asarray(index)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape, dtype=g.dtype)
        gm = np.moveaxis(g, list(range(axis, axis + index.ndim)), list(range(index.ndim)))
        fm = np.moveaxis(full, axis, 0)
        np.add.at(fm, index, gm)
        return (full,)

    return _op(np.take(x.data, index, axis=axis), (x,), backward, "take")


def concat(tensors, axis):
    tensors = list(tensors)
    axis = _norm_axis(axis, tensors[0].ndim)
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(t.ndim) if i != axis
        ):
            raise ValueError(f"concat: incompatible shapes {tensors[0].shape} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors))
        )

    return _op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward, "concat")


def split(x, sections, axis):
    """Split into ``sections`` equal parts (int) or parts of the given sizes (list)."""
    axis = _norm_axis(axis, x.ndim)
    n = x.shape[axis]
    if isinstance(sections, int):
        if n % sections:
            raise ValueError(f"split: extent {n} not divisible into {sections} parts")
        sizes = [n // sections] * sections
    else:
        sizes = list(sections)
        if builtins.sum(sizes) != n:
            raise ValueError(f"split: sizes {sizes} do not add up to extent {n}")
    outs = []
    start = 0
    for size in sizes:
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(start, start + size)
        outs.append(getitem(x, tuple(sl)))
        start += size
    return outs


def pad2d(x, pad):
    """Zero-pad the last two axes by ``pad`` on every side."""
    if pad == 0:
        return x
    sl = (Ellipsis, slice(pad, -pad), slice(pad, -pad))
    return _op(_pad_hw(x.data, pad), (x,), lambda g: (np.ascontiguousarray(g[sl]),), "pad")


def roll(x, shifts, axes):
    shifts = tuple(shifts) if isinstance(shifts, (tuple, list)) else (shifts,)
    axes = tuple(axes) if isinstance(axes, (tuple, list)) else (axes,)
    for a in axes:
        _norm_axis(a, x.ndim)
    back = tuple(-s for s in shifts)
    return _op(np.roll(x.data, shifts, axes), (x,), lambda g: (np.roll(g, back, axes),), "roll")


# ---------------------------------------------------------------------------
# activations and normalisation
# ---------------------------------------------------------------------------


def leaky_relu(x, slope=0.2):
    pos = x.data > 0
    slope = float(slope)
    return _op(np.where(pos, x.data, x.data * slope), (x,), lambda g: (np.where(pos, g, g * slope),), "leaky_relu")


def gelu(x):
    """Exact GELU, x * Phi(x)."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd / _SQRT2))

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
        return (g * (cdf + xd * pdf),)

    return _op((xd * cdf).astype(xd.dtype, copy=False), (x,), backward, "gelu")


def softmax(x, axis=-1):
    axis = _norm_axis(axis, x.ndim)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    y = np.exp(z)
    y /= y.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _op(y, (x,), backward, "softmax")


def layer_norm(x, weight=None, bias=None, axis=-1, eps=1e-5):
    """Normalise to zero mean / unit variance along ``axis``, then scale and shift."""
    axis = _norm_axis(axis, x.ndim)
    n = x.shape[axis]
    bshape = [1] * x.ndim
    bshape[axis] = n
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    w = weight.data.reshape(bshape) if weight is not None else None
    out = xhat * w if w is not None else xhat
    if bias is not None:
        out = out + bias.data.reshape(bshape)
    other = tuple(i for i in range(x.ndim) if i != axis)

    def backward(g):
        dxhat = g * w if w is not None else g
        dx = inv * (
            dxhat
            - dxhat.mean(axis=axis, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True)
        )
        grads = [dx]
        if weight is not None:
            grads.append((g * xhat).sum(axis=other))
        if bias is not None:
            grads.append(g.sum(axis=other))
        return tuple(grads)

    parents = (x,) + tuple(p for p in (weight, bias) if p is not None)
    return _op(out, parents, backward, "layer_norm")


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------


def matmul(a, b, tag="matmul"):
    """Matrix product over the last two axes; leading (batch) axes must be identical."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    m, k = a.shape[-2:]
    n = b.shape[-1]
    batch = int(np.prod(a.shape[:-2], dtype=np.int64))
    count_macs(tag, batch * m * k * n)
    ad, bd = a.data, b.data

    def backward(g):
        return g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g

    return _op(ad @ bd, (a, b), backward, "matmul")


def linear(x, weight, bias=None, tag="linear"):
    """x[..., in] @ weight[in, out] (+ bias[out])."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
    lead = x.shape[:-1]
    rows = int(np.prod(lead, dtype=np.int64))
    count_macs(tag, rows * weight.shape[0] * weight.shape[1])
    x2 = x.data.reshape(rows, -1)
    wd = weight.data
    out = x2 @ wd
    if bias is not None:
        out += bias.data

    def backward(g):
        g2 = g.reshape(rows, -1)
        grads = [(g2 @ wd.T).reshape(x.shape), x2.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return _op(out.reshape(lead + (wd.shape[1],)), parents, backward, "linear")


def conv_output_size(n, k, stride, pad):
    span = n + 2 * pad - k
    if span < 0 or span % stride:
        raise ValueError(
            f"conv geometry not exact: extent {n}, kernel {k}, stride {stride}, pad {pad}"
        )
    return span // stride + 1


def _pad_hw(a, p):
    out = np.zeros(a.shape[:-2] + (a.shape[-2] + 2 * p, a.shape[-1] + 2 * p), dtype=a.dtype)
    out[..., p:-p, p:-p] = a
    return out


def _im2col(xp, k, stride):
    """(B, C, Hp, Wp) -> (k*k*C, B*Ho*Wo) patch matrix, rows ordered (i, j, c)."""
    bsz, c, hp, wp = xp.shape
    ho, wo = (hp - k) // stride + 1, (wp - k) // stride + 1
    xt = xp.transpose(1, 0, 2, 3)
    cols = np.empty((k, k, c, bsz, ho, wo), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[i, j] = xt[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols.reshape(k * k * c, bsz * ho * wo)


def conv2d(x, weight, bias=None, stride=1, pad=0):
    """2-D cross-correlation (no kernel flip) on ``[B,] C_in x H x W`` input."""
    unbatched = x.ndim == 3
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d: expected (B,C,H,W) input and 4-d weight, got {x.shape}, {weight.shape}")
    cout, cin, kh, kw = weight.shape
    if x.shape[1] != cin:
        raise ValueError(f"conv2d: input has {x.shape[1]} channels, weight expects {cin}")
    if kh != kw:
        raise ValueError(f"conv2d: square kernels only, got {kh}x{kw}")
    k = kh
    bsz, _, h, w = x.shape
    ho = conv_output_size(h, k, stride, pad)
    wo = conv_output_size(w, k, stride, pad)
    xp = _pad_hw(x.data, pad) if pad else x.data
    cols = _im2col(xp, k, stride)
    wm = weight.data.transpose(0, 2, 3, 1).reshape(cout, k * k * cin)
    out = wm @ cols
    if bias is not None:
        out += bias.data[:, None]
    out = np.ascontiguousarray(out.reshape(cout, bsz, ho, wo).transpose(1, 0, 2, 3))
    count_macs("conv", bsz * ho * wo * cout * cin * k * k)
    hp, wp = xp.shape[2:]

    def backward(g):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(cout, bsz * ho * wo)
        dw = (gt @ cols.T).reshape(cout, k, k, cin).transpose(0, 3, 1, 2)
        if stride == 1:
            # full correlation of the output gradient with the flipped kernel
            q = k - 1 - pad
            gp = _pad_hw(g, q) if q else g
            wf = weight.data[:, :, ::-1, ::-1].transpose(1, 2, 3, 0).reshape(cin, k * k * cout)
            dx = (wf @ _im2col(gp, k, 1)).reshape(cin, bsz, h, w).transpose(1, 0, 2, 3)
        else:
            dcols = (wm.T @ gt).reshape(k, k, cin, bsz, ho, wo)
            dxp = np.zeros((cin, bsz, hp, wp), dtype=g.dtype)
            for i in range(k):
                for j in range(k):
                    dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[i, j]
            dx = dxp[:, :, pad : hp - pad, pad : wp - pad] if pad else dxp
            dx = dx.transpose(1, 0, 2, 3)
        grads = [np.ascontiguousarray(dx), np.ascontiguousarray(dw)]
        if bias is not None:
            grads.append(gt.sum(axis=1))
        return tuple(grads)

    parents = (x, weight) + ((bias,) if bias is not None else ())
    y = _op(out, parents, backward, "conv2d")
    return reshape(y, y.shape[1:]) if unbatched else y


def conv_transpose2d(x, weight, bias=None, stride=2):
    """Transposed convolution with kernel == stride (non-overlapping taps).

    ``weight`` is ``C_in x C_out x k x k``; every input site expands into a
    k x k output block.
    """
    unbatched = x.ndim == 3
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    cin, cout, kh, kw = weight.shape
    if kh != stride or kw != stride:
        raise ValueError(f"conv_transpose2d: kernel {kh}x{kw} must equal stride {stride}")
    if x.shape[1] != cin:
        raise ValueError(f"conv_transpose2d: input has {x.shape[1]} channels, weight expects {cin}")
    k = stride
    bsz, _, h, w = x.shape
    wd = weight.data.reshape(cin, cout * k * k)
    x2 = x.data.transpose(0, 2, 3, 1).reshape(bsz * h * w, cin)
    y = (x2 @ wd).reshape(bsz, h, w, cout, k, k)
    out = y.transpose(0, 3, 1, 4, 2, 5).reshape(bsz, cout, h * k, w * k)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    count_macs("conv", bsz * h * w * cin * cout * k * k)

    def backward(g):
        g6 = g.reshape(bsz, cout, h, k, w, k).transpose(0, 2, 4, 1, 3, 5).reshape(bsz * h * w, cout * k * k)
        dx = (g6 @ wd.T).reshape(bsz, h, w, cin).transpose(0, 3, 1, 2)
        dw = (x2.T @ g6).reshape(weight.shape)
        grads = [np.ascontiguousarray(dx), dw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    parents = (x, weight) + ((bias,) if bias is not None else ())
    y = _op(np.ascontiguousarray(out), parents, backward, "conv_transpose2d")
    return reshape(y, y.shape[1:]) if unbatched else y
