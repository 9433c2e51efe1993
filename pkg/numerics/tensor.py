"""
Dense Tensor for RSLab
numpy-backed arrays with a reverse-mode differentiation tape
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import settings
from utils.errors import ContractError, DimensionError, NumericError

DTYPE = np.float64

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class _Mode(threading.local):
    """Per-thread tape switch; evaluation workers toggle it independently"""

    grad_enabled = True


_mode = _Mode()
_debug = [settings.DEBUG_VALIDATION]

_SIGMOID_LOW = np.finfo(DTYPE).tiny
_SIGMOID_HIGH = np.nextafter(1.0, 0.0)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block (inference, finite differences)"""
    previous, _mode.grad_enabled = _mode.grad_enabled, False
    try:
        yield
    finally:
        _mode.grad_enabled = previous


def set_debug(enabled: bool) -> bool:
    """Toggle NaN/Inf validation of every op output; returns the previous value"""
    previous, _debug[0] = _debug[0], enabled
    return previous


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape`, undoing numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


class Tensor:
    """Dense array of doubles with optional gradient tracking"""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_op")
    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: str = ""):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    # ------------------------------------------------------------------ plumbing

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], op: str, backward: BackwardFn) -> "Tensor":
        """Wrap an op result, recording it on the tape when any parent is tracked"""
        out = cls(data)
        out._op = op
        if _mode.grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        if _debug[0] and not np.all(np.isfinite(out.data)):
            raise NumericError(f"non-finite output from op '{op}'")
        return out

    @staticmethod
    def lift(value: ArrayLike) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------ backward

    def backward(self):
        """Accumulate d(self)/d(leaf) into every tracked leaf's .grad

        Leaf gradients accumulate across calls until zero_grad() is called.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("loss is not reachable from any tracked tensor")

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

    # ------------------------------------------------------------------ elementwise

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = Tensor.lift(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.from_op(
            self.data + other.data, (self, other), "add",
            lambda g: (unbroadcast(g, a_shape), unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), "neg", lambda g: (-g,))

    def __sub__(self, other: ArrayLike) -> "Tensor":
        other = Tensor.lift(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor.from_op(
            self.data - other.data, (self, other), "sub",
            lambda g: (unbroadcast(g, a_shape), unbroadcast(-g, b_shape)),
        )

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return Tensor.lift(other) - self

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = Tensor.lift(other)
        a, b = self.data, other.data
        return Tensor.from_op(
            a * b, (self, other), "mul",
            lambda g: (unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = Tensor.lift(other)
        a, b = self.data, other.data
        return Tensor.from_op(
            a / b, (self, other), "div",
            lambda g: (unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)),
        )

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return Tensor.lift(other) / self

    def __pow__(self, power: float) -> "Tensor":
        a = self.data
        return Tensor.from_op(a ** power, (self,), f"pow{power}", lambda g: (g * power * a ** (power - 1),))

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor.from_op(out, (self,), "exp", lambda g: (g * out,))

    def log(self) -> "Tensor":
        a = self.data
        return Tensor.from_op(np.log(a), (self,), "log", lambda g: (g / a,))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor.from_op(out, (self,), "tanh", lambda g: (g * (1.0 - out * out),))

    def sigmoid(self) -> "Tensor":
        # exp of a non-positive argument only, then held inside the open interval (0, 1)
        z = np.exp(-np.abs(self.data))
        out = np.where(self.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
        out = np.clip(out, _SIGMOID_LOW, _SIGMOID_HIGH)
        return Tensor.from_op(out, (self,), "sigmoid", lambda g: (g * out * (1.0 - out),))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor.from_op(np.where(mask, self.data, 0.0), (self,), "relu", lambda g: (g * mask,))

    # ------------------------------------------------------------------ linear algebra

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    # ------------------------------------------------------------------ shape

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor.from_op(self.data.reshape(shape), (self,), "reshape", lambda g: (g.reshape(original),))

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor.from_op(self.data.transpose(axes), (self,), "transpose", lambda g: (g.transpose(inverse),))

    @property
    def T(self) -> "Tensor":
        """Swap the last two axes"""
        axes = list(range(self.ndim))
        axes[-2], axes[-1] = axes[-1], axes[-2]
        return self.transpose(tuple(axes))

    def __getitem__(self, index) -> "Tensor":
        if isinstance(index, Tensor):
            index = index.data.astype(np.int64)
        shape = self.shape
        basic = _is_basic_index(index)

        def _backward(g):
            full = np.zeros(shape, dtype=DTYPE)
            if basic:
                full[index] += g
            else:
                np.add.at(full, index, g)
            return (full,)

        return Tensor.from_op(self.data[index], (self,), "getitem", _backward)

    # ------------------------------------------------------------------ reductions

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def _backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor.from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum", _backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))


def _topological_order(root: Tensor) -> List[Tensor]:
    """Parents-before-children order of the tape reachable from root"""
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, leading axes broadcast"""
    a, b = Tensor.lift(a), Tensor.lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    a_data, b_data = a.data, b.data

    def _backward(g):
        grad_a = g @ np.swapaxes(b_data, -1, -2)
        grad_b = np.swapaxes(a_data, -1, -2) @ g
        return unbroadcast(grad_a, a_data.shape), unbroadcast(grad_b, b_data.shape)

    return Tensor.from_op(a_data @ b_data, (a, b), "matmul", _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Join tensors along an existing axis"""
    tensors = [Tensor.lift(t) for t in tensors]
    datas = [t.data for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat failed: {e}") from e
    splits = np.cumsum([d.shape[axis] for d in datas])[:-1]
    return Tensor.from_op(out, tensors, "concat", lambda g: tuple(np.split(g, splits, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join tensors along a new axis"""
    tensors = [Tensor.lift(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"stack failed: {e}") from e
    count = len(tensors)
    return Tensor.from_op(
        out, tensors, "stack",
        lambda g: tuple(np.squeeze(part, axis=axis) for part in np.split(g, count, axis=axis)),
    )
