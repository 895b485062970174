"""Dense tensor with reverse-mode automatic differentiation.

Every value in the network is a :class:`Tensor`.  Operations that involve a
tensor with ``requires_grad=True`` record a :class:`Node` holding the parent
tensors and a closure mapping the output gradient to the parent gradients.
:meth:`Tensor.backward` walks that graph once in reverse topological order.
"""

from __future__ import annotations

import contextlib
import threading
from collections import defaultdict

import numpy as np

__all__ = [
    "Tensor",
    "Node",
    "tensor",
    "zeros",
    "no_grad",
    "is_grad_enabled",
    "default_dtype",
    "get_default_dtype",
    "mac_counter",
    "count_macs",
    "topological_order",
]

_state = threading.local()


def _get(name, default):
    return getattr(_state, name, default)


def get_default_dtype():
    return _get("dtype", np.float32)


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily change the dtype new tensors are created with.

    Gradient checks run the graph in float64; everything else stays float32.
    """
    prev = get_default_dtype()
    _state.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _state.dtype = prev


def is_grad_enabled():
    return _get("grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    prev = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class MacCounter:
    """Tally of multiply-accumulates per tag, filled by instrumented matmuls."""

    def __init__(self):
        self.counts = defaultdict(int)

    def add(self, tag, n):
        self.counts[tag] += int(n)

    @property
    def total(self):
        return sum(self.counts.values())

    def __getitem__(self, tag):
        return self.counts.get(tag, 0)


@contextlib.contextmanager
def mac_counter():
    """Collect multiply-accumulate counts from every matmul run inside the block."""
    counter = MacCounter()
    prev = _get("macs", None)
    _state.macs = counter
    try:
        yield counter
    finally:
        _state.macs = prev


def count_macs(tag, n):
    counter = _get("macs", None)
    if counter is not None:
        counter.add(tag, n)


class Node:
    """One recorded operation: its inputs and the rule for pushing gradients to them."""

    __slots__ = ("op", "parents", "backward")

    def __init__(self, op, parents, backward):
        self.op = op
        self.parents = parents
        self.backward = backward

    def __repr__(self):
        return f"Node({self.op}, n_parents={len(self.parents)})"


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node", "name", "__weakref__")

    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype or get_default_dtype())
        if arr.ndim and 0 in arr.shape:
            raise ValueError(f"tensor extents must be positive, got {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = None
        self.name = name

    # -- construction of graph outputs -------------------------------------

    @classmethod
    def _from_op(cls, data, parents, backward, op):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        needs = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        out.node = Node(op, tuple(parents), backward) if needs else None
        return out

    # -- basic properties ---------------------------------------------------

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

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self):
        return self.data.shape[0]

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        from . import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F

        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F

        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F

        if isinstance(other, Tensor):
            return F.mul(self, F.reciprocal(other))
        return F.mul(self, 1.0 / other)

    def __neg__(self):
        from . import functional as F

        return F.mul(self, -1.0)

    def __pow__(self, p):
        from . import functional as F

        return F.power(self, p)

    def __matmul__(self, other):
        from . import functional as F

        return F.matmul(self, other)

    def __getitem__(self, idx):
        from . import functional as F

        return F.getitem(self, idx)

    def sum(self, axis=None):
        from . import functional as F

        return F.sum(self, axis)

    def mean(self, axis=None):
        from . import functional as F

        return F.mean(self, axis)

    def reshape(self, *shape):
        from . import functional as F

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        from . import functional as F

        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes or None)

    # -- autodiff -----------------------------------------------------------

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf that requires grad."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError(
                    f"backward() without an explicit gradient needs a scalar root, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.shape:
                raise ValueError(f"gradient shape {grad.shape} != tensor shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that is not part of a graph")

        grads = {id(self): grad}
        for t in topological_order(self):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t.node is None:
                if t.requires_grad:
                    t.grad = g.copy() if t.grad is None else t.grad + g
                continue
            parent_grads = t.node.backward(g)
            for p, pg in zip(t.node.parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                if pg.shape != p.shape:
                    raise RuntimeError(
                        f"{t.node.op}: backward produced gradient {pg.shape} for input {p.shape}"
                    )
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def topological_order(root):
    """Tensors reachable from ``root`` ordered so each one precedes all of its parents."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for p in t.node.parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
    order.reverse()
    return order


def tensor(data, requires_grad=False, dtype=None):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def zeros(shape, requires_grad=False, dtype=None):
    return Tensor(np.zeros(shape, dtype=dtype or get_default_dtype()), requires_grad=requires_grad)
