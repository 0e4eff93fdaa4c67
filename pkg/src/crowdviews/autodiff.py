"""Minimal reverse-mode automatic differentiation on numpy arrays.

A `Tensor` wraps an ndarray plus a closure that routes the incoming
gradient to its parents. Graphs are built eagerly by the op functions
below and differentiated with `Tensor.backward()`, which walks the tape
in reverse topological order. Only the ops the training objective needs
are provided; all of them support numpy broadcasting, with gradients
summed back to each parent's shape.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        """Same values, no gradient flow (stop-gradient)."""
        return Tensor(self.data)

    def backward(self):
        """Accumulate d(self)/d(leaf) into `.grad` of every reachable leaf."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def _accumulate(self, g: np.ndarray):
        if not self.requires_grad:
            return
        g = _unbroadcast(g, self.data.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # operator sugar, constants auto-wrapped
    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def leaf(data) -> Tensor:
    """Trainable leaf; `.grad` is populated by backward()."""
    return Tensor(data, requires_grad=True)


def add(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(g)
        b._accumulate(g)

    return Tensor(a.data + b.data, parents=(a, b), backward=bk)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(g)
        b._accumulate(-g)

    return Tensor(a.data - b.data, parents=(a, b), backward=bk)


def neg(a: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(-g)

    return Tensor(-a.data, parents=(a,), backward=bk)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(g * b.data)
        b._accumulate(g * a.data)

    return Tensor(a.data * b.data, parents=(a, b), backward=bk)


def div(a: Tensor, b: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(g / b.data)
        b._accumulate(-g * a.data / (b.data * b.data))

    return Tensor(a.data / b.data, parents=(a, b), backward=bk)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product."""

    def bk(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return Tensor(a.data @ b.data, parents=(a, b), backward=bk)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bk(g):
        a._accumulate(g * out_data)

    return Tensor(out_data, parents=(a,), backward=bk)


def log(a: Tensor) -> Tensor:
    def bk(g):
        a._accumulate(g / a.data)

    return Tensor(np.log(a.data), parents=(a,), backward=bk)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bk(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return Tensor(out_data, parents=(a,), backward=bk)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bk(g):
        a._accumulate(g * mask)

    return Tensor(np.maximum(a.data, 0.0), parents=(a,), backward=bk)


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    def bk(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape))
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,), backward=bk)


def stack(tensors: list, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]

    def bk(g):
        for i, t in enumerate(tensors):
            t._accumulate(np.take(g, i, axis=axis))

    return Tensor(
        np.stack([t.data for t in tensors], axis=axis),
        parents=tuple(tensors),
        backward=bk,
    )


def gather(a: Tensor, indices) -> Tensor:
    """Select rows along axis 0; duplicate indices accumulate gradient."""
    indices = np.asarray(indices)

    def bk(g):
        out = np.zeros_like(a.data)
        np.add.at(out, indices, g)
        a._accumulate(out)

    return Tensor(a.data[indices], parents=(a,), backward=bk)


def take_index(a: Tensor, index: int, axis: int) -> Tensor:
    """Single slice along `axis` (the axis is dropped)."""

    def bk(g):
        out = np.zeros_like(a.data)
        sl = [slice(None)] * a.data.ndim
        sl[axis] = index
        out[tuple(sl)] = g
        a._accumulate(out)

    return Tensor(np.take(a.data, index, axis=axis), parents=(a,), backward=bk)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    def bk(g):
        a._accumulate(g.reshape(a.data.shape))

    return Tensor(a.data.reshape(shape), parents=(a,), backward=bk)


def logsumexp(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Stabilized log-sum-exp; the max shift is treated as a constant."""
    shift = Tensor(a.data.max(axis=axis, keepdims=True))
    out = log(tsum(exp(sub(a, shift)), axis=axis, keepdims=True)) + shift
    if not keepdims:
        out = reshape(out, tuple(np.delete(out.data.shape, axis)))
    return out


def log_softmax(a: Tensor, axis: int) -> Tensor:
    return sub(a, logsumexp(a, axis=axis, keepdims=True))


def softmax(a: Tensor, axis: int) -> Tensor:
    return exp(log_softmax(a, axis=axis))
