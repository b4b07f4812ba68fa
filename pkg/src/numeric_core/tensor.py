#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tensor and Reverse-Mode Differentiation

This module provides a dense 64-bit tensor that records the operations applied
to it on a dynamic tape, together with the elementwise, matrix, reduction and
shape operations used by the rest of the package.

Broadcasting is deliberately limited to scalar-with-tensor; any other
expansion goes through ``broadcast_to`` so that every gradient rule stays
explicit.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """
    Dense multi-dimensional array of real values

    A tensor created with ``requires_grad=True`` is a leaf of the tape; every
    tensor computed from at least one such leaf keeps references to its parents
    and a function mapping its output gradient to parent gradients.
    """

    __array_priority__ = 100

    def __init__(
        self,
        data: Union[np.ndarray, float, int, Sequence],
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _grad_fn: Optional[GradFn] = None,
        _op: str = "",
    ):
        """
        Initialize a tensor

        Args:
            data: Values; converted to a float64 array without copying when
                  already in that format
            requires_grad: Whether gradients should be computed for this tensor
        """
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim > 0 and 0 in self.data.shape:
            raise ShapeError(f"tensor extents must be positive, got {self.data.shape}")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._grad_fn = _grad_fn
        self._op = _op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        """
        Get the value of a single-element tensor

        Returns:
            The value as a Python float
        """
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """
        Copy the values into a tensor that is not on any tape

        Returns:
            A new constant tensor
        """
        return Tensor(self.data.copy())

    def backward(self) -> "Tape":
        return backward(self)

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        return reduce("sum", self, axis)

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        return reduce("mean", self, axis)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __add__(self, other: "TensorLike") -> "Tensor":
        return add(self, other)

    def __radd__(self, other: "TensorLike") -> "Tensor":
        return add(other, self)

    def __sub__(self, other: "TensorLike") -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: "TensorLike") -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: "TensorLike") -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: "TensorLike") -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Union[float, int]) -> "Tensor":
        if not isinstance(other, (int, float)):
            raise DomainError("division is only supported by a scalar constant")
        return mul(self, 1.0 / other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        op = f", op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{op})"


TensorLike = Union[Tensor, np.ndarray, float, int]


def as_tensor(value: TensorLike) -> Tensor:
    """
    Wrap a value as a constant tensor unless it already is a tensor

    Args:
        value: Tensor, array or number

    Returns:
        A tensor
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def parameter(data: Union[np.ndarray, float, Sequence]) -> Tensor:
    """Create a trainable leaf tensor holding a private copy of ``data``"""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _result(data: np.ndarray, parents: Tuple[Tensor, ...], grad_fn: GradFn, op: str) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _grad_fn=grad_fn, _op=op)
    return Tensor(data, _op=op)


class Tape:
    """
    Topologically ordered record of the operations that produced a tensor

    Every node appears after all of its parents. The tape is rebuilt from the
    output tensor each time, so it always matches the latest forward pass.
    """

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        """
        Build the tape for everything ``root`` depends on

        Args:
            root: Output tensor

        Returns:
            The tape in topological order
        """
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, root: Tensor) -> None:
        """
        Propagate gradients from ``root`` to every leaf on the tape

        Each node is visited exactly once in reverse order. Leaf gradients are
        overwritten, not accumulated across calls.

        Args:
            root: The tensor the tape was recorded from
        """
        grads: Dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                node.grad = np.array(grad, dtype=np.float64)
                continue
            parent_grads = node._grad_fn(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad


def backward(loss: Tensor) -> Tape:
    """
    Compute the gradient of a scalar loss with respect to every leaf

    Args:
        loss: Single-element tensor on the tape

    Returns:
        The tape that was traversed
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise DomainError("loss does not depend on any tensor that requires grad")
    tape = Tape.record(loss)
    tape.backward(loss)
    return tape


# Elementwise operations


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{op}: operand shapes differ: {a.shape} vs {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(np.sum(grad)).reshape(shape)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise(a, b, "add")

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), grad_fn, "add")


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise(a, b, "sub")

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), grad_fn, "sub")


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise(a, b, "mul")

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), grad_fn, "mul")


hadamard = mul


def neg(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log of non-positive input")
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    positive = a.data > 0.0
    return _result(np.where(positive, a.data, 0.0), (a,), lambda g: (g * positive,), "relu")


_ELEMENTWISE: Dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "hadamard": hadamard,
    "neg": neg,
    "exp": exp,
    "log": log,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
}


def elementwise(op: str, *args: TensorLike) -> Tensor:
    """
    Apply a pointwise operation by name

    Args:
        op: One of add, sub, mul, hadamard, neg, exp, log, tanh, sigmoid, relu
        *args: Operands

    Returns:
        The pointwise result
    """
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise DomainError(f"unknown elementwise operation: {op}") from None
    return fn(*args)


# Matrix, reduction and shape operations


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of an m×k and a k×n tensor

    Args:
        a: Left operand
        b: Right operand

    Returns:
        The m×n product
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), grad_fn, "matmul")


def reduce(op: str, t: Tensor, axis: Optional[int] = None) -> Tensor:
    """
    Sum or average a tensor, entirely or along one axis

    Args:
        op: ``sum`` or ``mean``
        t: Input tensor
        axis: Axis to reduce, or None for all elements

    Returns:
        The reduced tensor
    """
    t = as_tensor(t)
    if op not in ("sum", "mean"):
        raise DomainError(f"unknown reduction: {op}")
    if axis is not None and not 0 <= axis < t.ndim:
        raise ShapeError(f"axis {axis} out of range for rank {t.ndim}")

    count = t.size if axis is None else t.shape[axis]
    scale = 1.0 if op == "sum" else 1.0 / count
    out = np.sum(t.data, axis=axis) * scale

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray]:
        if axis is None:
            return (np.full(t.shape, float(g) * scale),)
        return (np.broadcast_to(np.expand_dims(g, axis), t.shape) * scale,)

    return _result(np.asarray(out), (t,), grad_fn, op)


def reduce_sum(t: Tensor, axis: Optional[int] = None) -> Tensor:
    return reduce("sum", t, axis)


def reduce_mean(t: Tensor, axis: Optional[int] = None) -> Tensor:
    return reduce("mean", t, axis)


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    t = as_tensor(t)
    try:
        out = t.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError(f"cannot reshape {t.shape} to {tuple(shape)}") from None
    return _result(out, (t,), lambda g: (g.reshape(t.shape),), "reshape")


def _sum_to_shape(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, extent in enumerate(shape) if extent == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def broadcast_to(t: Tensor, shape: Sequence[int]) -> Tensor:
    """
    Expand a tensor to ``shape`` following right-aligned broadcasting

    The gradient sums over every expanded axis.

    Args:
        t: Input tensor
        shape: Target shape

    Returns:
        The expanded tensor
    """
    t = as_tensor(t)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(t.data, shape)
    except ValueError:
        raise ShapeError(f"cannot broadcast {t.shape} to {shape}") from None
    return _result(out, (t,), lambda g: (_sum_to_shape(g, t.shape),), "broadcast_to")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """
    Join tensors along an existing axis

    Args:
        tensors: Tensors with equal extents except along ``axis``
        axis: Axis to join along

    Returns:
        The joined tensor
    """
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.split(g, bounds, axis=axis))

    return _result(out, tuple(tensors), grad_fn, "concat")


def select(t: Tensor, index: int, axis: int = 0) -> Tensor:
    """
    Take one slice of a tensor along ``axis``, dropping that axis

    Args:
        t: Input tensor
        index: Position along the axis
        axis: Axis to index

    Returns:
        The selected slice
    """
    t = as_tensor(t)
    if not 0 <= axis < t.ndim or not -t.shape[axis] <= index < t.shape[axis]:
        raise ShapeError(f"select index {index} on axis {axis} out of range for {t.shape}")
    key: List[Union[slice, int]] = [slice(None)] * t.ndim
    key[axis] = index

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(t.shape)
        full[tuple(key)] = g
        return (full,)

    return _result(np.array(t.data[tuple(key)]), (t,), grad_fn, "select")


def log_softmax(t: Tensor) -> Tensor:
    """
    Numerically stable log-softmax over the last axis

    Args:
        t: Logits

    Returns:
        Log-probabilities with the same shape
    """
    t = as_tensor(t)
    shifted = t.data - np.max(t.data, axis=-1, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    probs = np.exp(out)

    def grad_fn(g: np.ndarray) -> Tuple[np.ndarray]:
        return (g - probs * np.sum(g, axis=-1, keepdims=True),)

    return _result(out, (t,), grad_fn, "log_softmax")


def softmax(logits: np.ndarray) -> np.ndarray:
    """
    Numerically stable softmax over the last axis

    Args:
        logits: Array of logits

    Returns:
        Probabilities summing to one along the last axis
    """
    logits = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(logits - np.max(logits, axis=-1, keepdims=True))
    return shifted / np.sum(shifted, axis=-1, keepdims=True)


def cross_entropy(logits: Tensor, targets: Sequence[int], reduction: str = "mean") -> Tensor:
    """
    Negative log-probability of the target classes

    Args:
        logits: B×C logits
        targets: B class indices
        reduction: ``mean`` or ``sum`` over the batch

    Returns:
        Scalar loss
    """
    logits = as_tensor(logits)
    if logits.ndim != 2 or logits.shape[0] != len(targets):
        raise ShapeError(f"cross_entropy needs B×C logits for {len(targets)} targets, got {logits.shape}")
    if reduction not in ("mean", "sum"):
        raise DomainError(f"unknown reduction: {reduction}")
    one_hot = np.zeros(logits.shape)
    one_hot[np.arange(len(targets)), np.asarray(targets, dtype=int)] = 1.0
    total = neg(reduce_sum(mul(log_softmax(logits), one_hot)))
    return total / len(targets) if reduction == "mean" else total
