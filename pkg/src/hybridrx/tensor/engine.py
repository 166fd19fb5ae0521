"""Reverse-mode automatic differentiation over numpy arrays.

Gradients of complex tensors follow the ``dL/dRe + 1j * dL/dIm`` convention,
so a real loss ``L`` changes by ``Re(sum(conj(grad) * dz))`` under a
perturbation ``dz``.  Real tensors always carry real gradients.

Calling :meth:`Tensor.backward` twice without :meth:`Tensor.zero_grad`
accumulates into ``grad``.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


class GraphError(RuntimeError):
    """Raised for misuse of the autodiff graph (non-scalar or detached loss)."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """N-dimensional array node with an optional gradient buffer."""

    __array_priority__ = 100.0
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind in "biu":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    # -- basic properties ---------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def check_finite(self, stage: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values in {stage}")
        return self

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return len(self.data)

    # -- autodiff -----------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        """Populate ``grad`` on every ``requires_grad`` ancestor of this node."""
        if not self.requires_grad:
            raise GraphError("backward() on a tensor that is not attached to a graph")
        if grad is None:
            if self.data.size != 1:
                raise GraphError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                # leaf
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _fit_grad(pg, parent)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def real(self):
        return real(self)

    @property
    def imag(self):
        return imag(self)

    def conj(self):
        return conj(self)

    @property
    def mH(self):
        """Conjugate transpose of the two trailing axes."""
        return conj(swapaxes(self, -1, -2))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, copy=True), requires_grad=True, name=name)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _fit_grad(g: np.ndarray, t: Tensor) -> np.ndarray:
    g = _unbroadcast(np.asarray(g), t.shape)
    if not t.is_complex and np.iscomplexobj(g):
        g = g.real
    return g.astype(t.data.dtype, copy=False)


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    """Wrap an op result; records the graph only if an input needs gradients."""
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(a.data + b.data, (a, b), lambda g: (g, g))


def neg(a: Tensor) -> Tensor:
    return make_node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return g * np.conj(b.data), g * np.conj(a.data)

    return make_node(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    q = a.data / b.data

    def bw(g):
        gb = np.conj(b.data)
        return g / gb, -g * np.conj(q) / gb

    return make_node(q, (a, b), bw)


def square(a: Tensor) -> Tensor:
    return make_node(a.data * a.data, (a,), lambda g: (2.0 * g * np.conj(a.data),))


def abs2(a: Tensor) -> Tensor:
    """Elementwise squared magnitude (real output)."""
    z = a.data
    out = (z.real ** 2 + z.imag ** 2) if np.iscomplexobj(z) else z * z
    return make_node(out, (a,), lambda g: (2.0 * g * z,))


def relu(x: Tensor) -> Tensor:
    """Elementwise ``max(0, x)``; the subgradient at 0 is taken as 0."""
    out = np.maximum(x.data, 0)
    return make_node(out, (x,), lambda g: (g * (out > 0),))


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return make_node(s, (x,), lambda g: (g * s * (1 - s),))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(v.dtype, copy=False)


def softplus(x: Tensor) -> Tensor:
    v = x.data
    out = np.maximum(v, 0) + np.log1p(np.exp(-np.abs(v)))
    return make_node(out, (x,), lambda g: (g * _sigmoid(v),))


def sigmoid_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Per-element binary cross entropy, ``targets`` in {0, 1} and P(1) = sigmoid(logits)."""
    t = np.asarray(targets, dtype=logits.dtype)
    v = logits.data
    out = np.maximum(v, 0) - v * t + np.log1p(np.exp(-np.abs(v)))
    return make_node(out, (logits,), lambda g: (g * (_sigmoid(v) - t),))


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return make_node(np.asarray(out), (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    n = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return tsum(x, axes, keepdims) * (1.0 / n)


def var(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Biased (population) variance over ``axis``."""
    m = mean(x, axis, keepdims=True)
    d = x - m
    return mean(abs2(d), axis, keepdims)


def reshape(x: Tensor, shape) -> Tensor:
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    return make_node(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    return make_node(np.swapaxes(x.data, a, b), (x,), lambda g: (np.swapaxes(g, a, b),))


def expand_dims(x: Tensor, axis: int) -> Tensor:
    return reshape(x, np.expand_dims(x.data, axis).shape)


def broadcast_to(x: Tensor, shape) -> Tensor:
    return make_node(np.broadcast_to(x.data, shape), (x,), lambda g: (g,))


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(i is None or i is Ellipsis or isinstance(i, (slice, int, np.integer)) for i in items)


def getitem(x: Tensor, idx) -> Tensor:
    basic = _is_basic_index(idx)

    def bw(g):
        full = np.zeros(x.shape, dtype=np.result_type(x.dtype, g.dtype))
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return make_node(x.data[idx], (x,), bw)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in ts], axis=axis)
    ax = axis % data.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in ts])

    def bw(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return make_node(data, ts, bw)


def stack(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in ts], axis=axis)
    ax = axis % data.ndim
    return make_node(data, ts, lambda g: tuple(np.take(g, i, axis=ax) for i in range(len(ts))))


# ---------------------------------------------------------------------------
# complex helpers and linear algebra
# ---------------------------------------------------------------------------

def real(z: Tensor) -> Tensor:
    return make_node(np.ascontiguousarray(z.data.real), (z,), lambda g: (g.astype(z.dtype),))


def imag(z: Tensor) -> Tensor:
    return make_node(np.ascontiguousarray(z.data.imag), (z,), lambda g: (1j * g,))


def complex_from(re: Tensor, im: Tensor) -> Tensor:
    re, im = as_tensor(re), as_tensor(im)
    return make_node(re.data + 1j * im.data, (re, im), lambda g: (g.real, g.imag))


def conj(z: Tensor) -> Tensor:
    if not z.is_complex:
        return z
    return make_node(np.conj(z.data), (z,), lambda g: (np.conj(g),))


def cast(x: Tensor, dtype) -> Tensor:
    """Change the floating dtype; gradients are cast back to the source dtype."""
    x = as_tensor(x)
    if x.dtype == np.dtype(dtype):
        return x
    return make_node(x.data.astype(dtype), (x,), lambda g: (g,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        ga = g @ np.conj(np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.conj(np.swapaxes(a.data, -1, -2)) @ g if b.requires_grad else None
        return ga, gb

    return make_node(a.data @ b.data, (a, b), bw)


def solve(a, b) -> Tensor:
    """Batched ``a^-1 b`` with gradients for both operands."""
    a, b = as_tensor(a), as_tensor(b)
    x = np.linalg.solve(a.data, b.data)

    def bw(g):
        gb = np.linalg.solve(np.conj(np.swapaxes(a.data, -1, -2)), g)
        ga = -gb @ np.conj(np.swapaxes(x, -1, -2)) if a.requires_grad else None
        return ga, gb

    return make_node(x, (a, b), bw)


def diagonal(x: Tensor) -> Tensor:
    """Diagonal of the two trailing axes."""
    n = x.shape[-1]
    d = np.diagonal(x.data, axis1=-2, axis2=-1).copy()

    def bw(g):
        full = np.zeros(x.shape, dtype=np.result_type(x.dtype, g.dtype))
        idx = np.arange(n)
        full[..., idx, idx] = g
        return (full,)

    return make_node(d, (x,), bw)


def einsum(spec: str, *operands) -> Tensor:
    """Two-operand einsum for holomorphic contractions (``'...ij,...jk->...ik'`` style).

    Each input subscript must appear in the output or in the other operand.
    """
    ops = [as_tensor(o) for o in operands]
    if len(ops) != 2:
        raise ValueError("einsum supports exactly two operands")
    ins, outs = spec.replace(" ", "").split("->")
    s0, s1 = ins.split(",")
    out = np.einsum(spec, ops[0].data, ops[1].data, optimize=True)

    def bw(g):
        g0 = np.einsum(f"{outs},{s1}->{s0}", g, np.conj(ops[1].data), optimize=True) if ops[0].requires_grad else None
        g1 = np.einsum(f"{outs},{s0}->{s1}", g, np.conj(ops[0].data), optimize=True) if ops[1].requires_grad else None
        return g0, g1

    return make_node(out, ops, bw)
