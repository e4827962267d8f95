"""Reverse-mode autodiff over float64 numpy arrays.

A Value wraps one ndarray plus the operation record needed for the backward
pass. Graphs are built eagerly by the op functions below; calling
``backward()`` on a scalar result accumulates gradients into every Value it
depends on. Operands that are plain numbers or ndarrays are treated as
constants and receive no gradient.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ClassOutOfRange(ValueError):
    """A class id lies outside [0, C)."""


class Value:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        parents: tuple["Value", ...] = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Backpropagate from this node; gradients sum over shared subgraphs."""
        order: list[Value] = []
        seen: set[int] = set()
        stack: list[tuple[Value, bool]] = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_as_array(other)) if not isinstance(other, Value) else add(self, -other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Value(shape={self.data.shape})"


class Parameter(Value):
    """Trainable leaf Value with a unique name inside its model."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _accum(node: Value, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.data)
    node.grad += g


def _sum_to_shape(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Undo numpy broadcasting: reduce gradient g to the given shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Value, b) -> Value:
    if isinstance(b, Value):
        try:
            data = a.data + b.data
        except ValueError:
            raise ShapeMismatch(f"add: {a.shape} vs {b.shape}") from None

        def back(g, a=a, b=b):
            _accum(a, _sum_to_shape(g, a.data.shape))
            _accum(b, _sum_to_shape(g, b.data.shape))

        return Value(data, (a, b), back)
    const = _as_array(b)
    data = a.data + const

    def back(g, a=a):
        _accum(a, _sum_to_shape(g, a.data.shape))

    return Value(data, (a,), back)


def mul(a: Value, b) -> Value:
    if isinstance(b, Value):
        try:
            data = a.data * b.data
        except ValueError:
            raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}") from None

        def back(g, a=a, b=b):
            _accum(a, _sum_to_shape(g * b.data, a.data.shape))
            _accum(b, _sum_to_shape(g * a.data, b.data.shape))

        return Value(data, (a, b), back)
    const = _as_array(b)
    data = a.data * const

    def back(g, a=a, const=const):
        _accum(a, _sum_to_shape(g * const, a.data.shape))

    return Value(data, (a,), back)


def matmul(a: Value, b) -> Value:
    b_val = b if isinstance(b, Value) else None
    b_data = b.data if isinstance(b, Value) else _as_array(b)
    a2 = a.data[None, :] if a.data.ndim == 1 else a.data
    b2 = b_data[:, None] if b_data.ndim == 1 else b_data
    if a2.ndim != 2 or b2.ndim != 2 or a2.shape[1] != b2.shape[0]:
        raise ShapeMismatch(f"matmul: {a.data.shape} @ {b_data.shape}")
    out2 = a2 @ b2
    out = out2
    if a.data.ndim == 1:
        out = out[0]
    if b_data.ndim == 1:
        out = out[..., 0]

    def back(g, a=a, b_val=b_val, a2=a2, b2=b2):
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        _accum(a, (g2 @ b2.T).reshape(a.data.shape))
        if b_val is not None:
            _accum(b_val, (a2.T @ g2).reshape(b_val.data.shape))

    return Value(out, (a, b_val) if b_val is not None else (a,), back)


def transpose(a: Value, axes: tuple[int, ...] | None = None) -> Value:
    data = np.transpose(a.data, axes)
    inv = None if axes is None else tuple(np.argsort(axes))

    def back(g, a=a, inv=inv):
        _accum(a, np.transpose(g, inv))

    return Value(data, (a,), back)


def reshape(a: Value, shape) -> Value:
    data = a.data.reshape(shape)

    def back(g, a=a):
        _accum(a, g.reshape(a.data.shape))

    return Value(data, (a,), back)


def sigmoid(a: Value) -> Value:
    # stable in both tails
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def back(g, a=a, out=out):
        _accum(a, g * out * (1.0 - out))

    return Value(out, (a,), back)


def tanh(a: Value) -> Value:
    out = np.tanh(a.data)

    def back(g, a=a, out=out):
        _accum(a, g * (1.0 - out * out))

    return Value(out, (a,), back)


def concat(values: Sequence[Value], axis: int = -1) -> Value:
    data = np.concatenate([v.data for v in values], axis=axis)
    sizes = [v.data.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def back(g, values=tuple(values), offsets=offsets, axis=axis):
        for v, start, stop in zip(values, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, stop)
            _accum(v, g[tuple(idx)])

    return Value(data, tuple(values), back)


def stack(values: Sequence[Value], axis: int = 0) -> Value:
    data = np.stack([v.data for v in values], axis=axis)

    def back(g, values=tuple(values), axis=axis):
        for i, v in enumerate(values):
            _accum(v, np.take(g, i, axis=axis))

    return Value(data, tuple(values), back)


def take(a: Value, key) -> Value:
    """Indexing/gather; integer-array keys scatter-add on backward."""
    data = a.data[key]
    fancy = isinstance(key, (np.ndarray, list)) or (
        isinstance(key, tuple) and any(isinstance(k, (np.ndarray, list)) for k in key)
    )

    def back(g, a=a, key=key, fancy=fancy):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        if fancy:
            np.add.at(a.grad, key, g)
        else:
            a.grad[key] += g

    return Value(data, (a,), back)


def vsum(a: Value, axis=None, keepdims: bool = False) -> Value:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g, a=a, axis=axis, keepdims=keepdims):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return Value(data, (a,), back)


def logsumexp(a: Value, axis: int) -> Value:
    m = np.max(a.data, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a.data - m), axis=axis)) + np.squeeze(m, axis=axis)

    def back(g, a=a, out=out, axis=axis):
        soft = np.exp(a.data - np.expand_dims(out, axis))
        _accum(a, np.expand_dims(g, axis) * soft)

    return Value(out, (a,), back)


def softmax_cross_entropy(logits: Value, targets, mask=None) -> Value:
    """Mean of -log softmax(logits)[target] over unmasked rows.

    logits: [N, C]; targets: int array [N]; mask: bool array [N] or None.
    Fully-masked input yields loss 0 and no gradient.
    """
    x = logits.data
    if x.ndim != 2:
        raise ShapeMismatch(f"softmax_cross_entropy expects [N,C] logits, got {x.shape}")
    n, c = x.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (n,):
        raise ShapeMismatch(f"targets shape {targets.shape} does not match {n} rows")
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ShapeMismatch(f"mask shape {mask.shape} does not match {n} rows")
    live = mask & True
    if live.any() and ((targets[live] < 0) | (targets[live] >= c)).any():
        raise ClassOutOfRange(f"target ids outside [0, {c})")
    count = int(live.sum())
    if count == 0:
        return Value(0.0)

    m = x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(x - m).sum(axis=1)) + m[:, 0]
    picked = x[np.arange(n), np.where(live, targets, 0)]
    losses = np.where(live, lse - picked, 0.0)
    out = losses.sum() / count

    def back(g, logits=logits, x=x, lse=lse, targets=targets, live=live, count=count):
        soft = np.exp(x - lse[:, None])
        soft[np.arange(len(targets)), np.where(live, targets, 0)] -= 1.0
        soft[~live] = 0.0
        _accum(logits, (float(g) / count) * soft)

    return Value(out, (logits,), back)
