"""
Dense float64 arrays with reverse-mode automatic differentiation.

Every operation returns a new :class:`Tensor`. When any input requires a
gradient (and recording is enabled) the result remembers its parents and a
closure mapping the output gradient to one gradient per parent; :func:`backward`
walks that graph in reverse topological order.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from omad.errors import ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_recording = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without building a graph (rollouts, Bellman targets)."""
    global _recording
    previous = _recording
    _recording = False
    try:
        yield
    finally:
        _recording = previous


def is_recording() -> bool:
    return _recording


class Tensor:
    """A float64 array node in the differentiation graph."""

    __array_ufunc__ = None

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple[Tensor, ...] = ()
        self._grad_fn: Optional[GradFn] = None
        self.op = ""

    # -- array protocol ---------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag}, op={self.op or 'leaf'!r})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operators --------------------------------------------------------
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return take(self, index)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Sequence[Tensor], grad_fn: GradFn, op: str) -> Tensor:
    out = Tensor(data)
    out.op = op
    if _recording and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc


# -- elementwise binary ----------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    return _result(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add",
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")
    return _result(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub",
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    return _result(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), "mul",
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "div")
    out = a.data / b.data

    def grad_fn(g: np.ndarray):
        return (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape))

    return _result(out, (a, b), grad_fn, "div")


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)
    return _result(
        a.data ** exponent, (a,),
        lambda g: (g * exponent * a.data ** (exponent - 1.0),), "pow",
    )


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return _result(
        a.data @ b.data, (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g), "matmul",
    )


# -- elementwise unary -----------------------------------------------------

def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _result(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def gelu(a: ArrayLike) -> Tensor:
    """Exact GeLU, x·Φ(x)."""
    a = as_tensor(a)
    cdf = 0.5 * (1.0 + special.erf(a.data / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * a.data ** 2) / math.sqrt(2.0 * math.pi)
    return _result(a.data * cdf, (a,), lambda g: (g * (cdf + a.data * pdf),), "gelu")


def clip_min(a: ArrayLike, floor: float) -> Tensor:
    """max(a, floor); the gradient is zero where the floor is active."""
    a = as_tensor(a)
    mask = a.data > floor
    return _result(np.where(mask, a.data, floor), (a,), lambda g: (g * mask,), "clip_min")


def stop_gradient(a: ArrayLike) -> Tensor:
    """Constant copy of ``a``: the value flows, the gradient does not."""
    return Tensor(as_tensor(a).data.copy())


# -- reductions and softmax ------------------------------------------------

def _expand(g: np.ndarray, shape: Tuple[int, ...], axis: Optional[int], keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tsum(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    return _result(
        a.data.sum(axis=axis, keepdims=keepdims), (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims),), "sum",
    )


def tmean(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return _result(
        a.data.mean(axis=axis, keepdims=keepdims), (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims) / count,), "mean",
    )


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    out = special.softmax(a.data, axis=axis)

    def grad_fn(g: np.ndarray):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _result(out, (a,), grad_fn, "softmax")


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    out = a.data - special.logsumexp(a.data, axis=axis, keepdims=True)

    def grad_fn(g: np.ndarray):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return _result(out, (a,), grad_fn, "log_softmax")


# -- structure -------------------------------------------------------------

def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[p.shape for p in parts]} along axis {axis}") from exc
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def grad_fn(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(out, parts, grad_fn, "concat")


def take(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)

    def grad_fn(g: np.ndarray):
        full = np.zeros(a.shape)
        np.add.at(full, index, g)
        return (full,)

    return _result(a.data[index], (a,), grad_fn, "take")


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {a.shape} -> {shape}") from exc
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


# -- differentiation -------------------------------------------------------

def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into the ``grad`` of every reachable leaf."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node._grad_fn is None:
            node.grad = np.array(grad) if node.grad is None else node.grad + grad
            continue
        for parent, parent_grad in zip(node._parents, node._grad_fn(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            parent_grad = _unbroadcast(np.asarray(parent_grad, dtype=np.float64), parent.shape)
            key = id(parent)
            pending[key] = pending[key] + parent_grad if key in pending else parent_grad
