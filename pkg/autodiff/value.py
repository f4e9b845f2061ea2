"""
============================================================================
SGG-HT - DIFFERENTIABLE VALUE
============================================================================
Define-by-run reverse-mode automatic differentiation over dense float64
numpy arrays.

Every forward op builds a new ``Value`` that records its parents and a
closure accumulating gradients into them. ``backward`` walks the graph
once in reverse topological order. A graph belongs to one thread; it is
rebuilt for every training step.
============================================================================
"""

from __future__ import annotations

from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from exceptions import ContractError, DimensionError, NumericError


ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
Operand = Union["Value", ArrayLike]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite output from {op}", op=op)


class Value:
    """
    Differentiable dense tensor node.

    Attributes:
        data: float64 array
        grad: float64 array of the same shape, zero-initialized
        requires_grad: whether gradients are tracked through this node
        op: name of the producing operation ("leaf" for inputs)
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        op: str = "leaf",
        parents: Tuple["Value", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
    ) -> None:
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr, op)
        self.data = arr
        self.grad = np.zeros_like(arr)
        self.requires_grad = requires_grad
        self.op = op
        self.name = name
        self._parents = parents
        self._backward = backward

    # ------------------------------------------------------------------
    # BASIC PROPERTIES
    # ------------------------------------------------------------------

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
        """Scalar value as a Python float."""
        if self.data.size != 1:
            raise ContractError("item() requires a single-element value", value=self.shape)
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Copy of the data."""
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Value":
        """Constant copy cut from the graph."""
        return Value(self.data, requires_grad=False)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Value(shape={self.shape}, op={self.op}{label}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # GRAPH CONSTRUCTION
    # ------------------------------------------------------------------

    @staticmethod
    def lift(x: Operand) -> "Value":
        """Wrap a constant; Values pass through."""
        return x if isinstance(x, Value) else Value(x)

    @staticmethod
    def make(
        data: np.ndarray,
        parents: Sequence["Value"],
        backward: Callable[[np.ndarray], None],
        op: str,
    ) -> "Value":
        """
        Create an op result. Parents and the closure are only kept when
        some parent tracks gradients.
        """
        track = any(p.requires_grad for p in parents)
        return Value(
            data,
            requires_grad=track,
            op=op,
            parents=tuple(parents) if track else (),
            backward=backward if track else None,
        )

    # ------------------------------------------------------------------
    # ARITHMETIC
    # ------------------------------------------------------------------

    def __add__(self, other: Operand) -> "Value":
        other = Value.lift(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _unbroadcast(g, a.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(g, b.shape)

        return Value.make(a.data + b.data, (a, b), backward, "add")

    __radd__ = __add__

    def __neg__(self) -> "Value":
        a = self

        def backward(g: np.ndarray) -> None:
            a.grad -= g

        return Value.make(-a.data, (a,), backward, "neg")

    def __sub__(self, other: Operand) -> "Value":
        other = Value.lift(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _unbroadcast(g, a.shape)
            if b.requires_grad:
                b.grad -= _unbroadcast(g, b.shape)

        return Value.make(a.data - b.data, (a, b), backward, "sub")

    def __rsub__(self, other: Operand) -> "Value":
        return Value.lift(other) - self

    def __mul__(self, other: Operand) -> "Value":
        other = Value.lift(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _unbroadcast(g * b.data, a.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(g * a.data, b.shape)

        return Value.make(a.data * b.data, (a, b), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other: Operand) -> "Value":
        other = Value.lift(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.grad += _unbroadcast(g / b.data, a.shape)
            if b.requires_grad:
                b.grad -= _unbroadcast(g * a.data / (b.data * b.data), b.shape)

        with np.errstate(divide="ignore", invalid="ignore"):
            out = a.data / b.data
        return Value.make(out, (a, b), backward, "div")

    def __rtruediv__(self, other: Operand) -> "Value":
        return Value.lift(other) / self

    def __pow__(self, exponent: float) -> "Value":
        if isinstance(exponent, Value):
            raise ContractError("only constant exponents are supported", field="exponent")
        a, p = self, float(exponent)

        def backward(g: np.ndarray) -> None:
            a.grad += g * p * np.power(a.data, p - 1.0)

        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.power(a.data, p)
        return Value.make(out, (a,), backward, "pow")

    def __matmul__(self, other: Operand) -> "Value":
        return matmul(self, Value.lift(other))

    def __rmatmul__(self, other: Operand) -> "Value":
        return matmul(Value.lift(other), self)

    # ------------------------------------------------------------------
    # SHAPE OPS
    # ------------------------------------------------------------------

    def __getitem__(self, index) -> "Value":
        a = self

        def backward(g: np.ndarray) -> None:
            np.add.at(a.grad, index, g)

        return Value.make(np.array(a.data[index]), (a,), backward, "getitem")

    def reshape(self, *shape: int) -> "Value":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self

        def backward(g: np.ndarray) -> None:
            a.grad += g.reshape(a.shape)

        return Value.make(a.data.reshape(shape), (a,), backward, "reshape")

    @property
    def T(self) -> "Value":
        return self.transpose()

    def transpose(self) -> "Value":
        if self.ndim != 2:
            raise DimensionError("transpose expects a matrix", actual=self.shape)
        a = self

        def backward(g: np.ndarray) -> None:
            a.grad += g.T

        return Value.make(a.data.T.copy(), (a,), backward, "transpose")

    # ------------------------------------------------------------------
    # REDUCTIONS
    # ------------------------------------------------------------------

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Value":
        a = self

        def backward(g: np.ndarray) -> None:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a.grad += np.broadcast_to(g, a.shape)

        return Value.make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Value":
        count = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # ------------------------------------------------------------------
    # ELEMENTWISE FUNCTIONS
    # ------------------------------------------------------------------

    def exp(self) -> "Value":
        a = self
        with np.errstate(over="ignore"):
            out = np.exp(a.data)

        def backward(g: np.ndarray) -> None:
            a.grad += g * out

        return Value.make(out, (a,), backward, "exp")

    def log(self) -> "Value":
        a = self

        def backward(g: np.ndarray) -> None:
            a.grad += g / a.data

        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(a.data)
        return Value.make(out, (a,), backward, "log")

    def tanh(self) -> "Value":
        a = self
        out = np.tanh(a.data)

        def backward(g: np.ndarray) -> None:
            a.grad += g * (1.0 - out * out)

        return Value.make(out, (a,), backward, "tanh")

    def relu(self) -> "Value":
        a = self
        mask = a.data > 0

        def backward(g: np.ndarray) -> None:
            a.grad += g * mask

        return Value.make(np.where(mask, a.data, 0.0), (a,), backward, "relu")

    def gelu(self) -> "Value":
        """Tanh approximation of GELU."""
        a = self
        c = np.sqrt(2.0 / np.pi)
        x = a.data
        t = np.tanh(c * (x + 0.044715 * x ** 3))

        def backward(g: np.ndarray) -> None:
            dt = (1.0 - t * t) * c * (1.0 + 3 * 0.044715 * x * x)
            a.grad += g * (0.5 * (1.0 + t) + 0.5 * x * dt)

        return Value.make(0.5 * x * (1.0 + t), (a,), backward, "gelu")


# ============================================================================
# MATRIX PRODUCT
# ============================================================================

def matmul(a: Value, b: Value) -> Value:
    """
    Matrix product for ``[m×k]·[k×n]`` and ``[k]·[k×n]``.

    Backward accumulates dA = dC·Bᵀ and dB = Aᵀ·dC.

    Raises:
        DimensionError: when inner dimensions disagree or ranks are unsupported
    """
    if b.ndim != 2 or a.ndim not in (1, 2):
        raise DimensionError("matmul expects [m×k]·[k×n] or [k]·[k×n]", actual=[a.ndim, b.ndim])
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions differ: {a.shape} · {b.shape}",
            expected=[a.shape[-1]],
            actual=[b.shape[0]],
        )

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            if a.ndim == 1:
                b.grad += np.outer(a.data, g)
            else:
                b.grad += a.data.T @ g

    return Value.make(a.data @ b.data, (a, b), backward, "matmul")


def concat(values: Sequence[Value], axis: int = 0) -> Value:
    """
    Concatenate values along an existing axis.

    Raises:
        DimensionError: when the off-axis shapes differ
    """
    if not values:
        raise DimensionError("concat needs at least one value")
    arrays = [v.data for v in values]
    try:
        out = np.concatenate(arrays, axis=axis)
    except ValueError as e:
        raise DimensionError(
            f"concat shapes incompatible: {[a.shape for a in arrays]}", cause=e
        ) from e
    bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]

    def backward(g: np.ndarray) -> None:
        for v, part in zip(values, np.split(g, bounds, axis=axis)):
            if v.requires_grad:
                v.grad += part

    return Value.make(out, tuple(values), backward, "concat")


# ============================================================================
# BACKWARD PASS
# ============================================================================

def topological_order(root: Value) -> List[Value]:
    """
    Nodes reachable from ``root`` in topological order (parents first),
    each exactly once.
    """
    order: List[Value] = []
    visited = set()
    stack: List[Tuple[Value, bool]] = [(root, False)]
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


def backward(loss: Value) -> None:
    """
    Populate ``grad`` of every tracked node with ∂loss/∂node.

    Gradients accumulate additively, so fan-out sums over paths and
    repeated calls add up until grads are zeroed.

    Raises:
        ContractError: when ``loss`` is not a scalar
    """
    if loss.size != 1:
        raise ContractError("backward requires a scalar loss", value=loss.shape)
    if not loss.requires_grad:
        return

    loss.grad = loss.grad + np.ones_like(loss.data)
    for node in reversed(topological_order(loss)):
        if node._backward is not None:
            node._backward(node.grad)


# ============================================================================
# END OF VALUE MODULE
# ============================================================================
