"""Tiny tape-free reverse-mode differentiation over numpy arrays.

Each :class:`Tensor` remembers its parents and a closure that pushes its
gradient back to them. :meth:`Tensor.backward` walks the graph in reverse
topological order. Only the operations the denoiser needs are provided.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, value, parents=(), backward=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Backpropagate from this (usually scalar) tensor."""
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.value) if grad is None else grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    __add__ = lambda self, other: add(self, other)  # noqa: E731
    __radd__ = lambda self, other: add(other, self)  # noqa: E731
    __sub__ = lambda self, other: sub(self, other)  # noqa: E731
    __rsub__ = lambda self, other: sub(other, self)  # noqa: E731
    __mul__ = lambda self, other: mul(self, other)  # noqa: E731
    __rmul__ = lambda self, other: mul(other, self)  # noqa: E731
    __truediv__ = lambda self, other: div(self, other)  # noqa: E731
    __matmul__ = lambda self, other: matmul(self, other)  # noqa: E731
    __neg__ = lambda self: mul(self, -1.0)  # noqa: E731

    def __getitem__(self, idx):
        return gather(self, idx)


def param(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value - b.value, (a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    out._backward = backward
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value / b.value, (a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.shape))

    out._backward = backward
    return out


def matmul(x, w) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    out = Tensor(x.value @ w.value, (x, w))

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ w.value.T)
        if w.requires_grad:
            w._accumulate(x.value.T @ g)

    out._backward = backward
    return out


def silu(x) -> Tensor:
    x = as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.value))
    out = Tensor(x.value * s, (x,))

    def backward(g):
        x._accumulate(g * (s * (1.0 + x.value * (1.0 - s))))

    out._backward = backward
    return out


def exp(x) -> Tensor:
    x = as_tensor(x)
    v = np.exp(x.value)
    out = Tensor(v, (x,))

    def backward(g):
        x._accumulate(g * v)

    out._backward = backward
    return out


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    v = np.sqrt(x.value)
    out = Tensor(v, (x,))

    def backward(g):
        x._accumulate(g * 0.5 / v)

    out._backward = backward
    return out


def square(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.value * x.value, (x,))

    def backward(g):
        x._accumulate(2.0 * g * x.value)

    out._backward = backward
    return out


def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = Tensor(x.value.sum(axis=axis, keepdims=keepdims), (x,))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape))

    out._backward = backward
    return out


def concat(xs, axis=-1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    out = Tensor(np.concatenate([x.value for x in xs], axis=axis), tuple(xs))
    splits = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def backward(g):
        for x, gx in zip(xs, np.split(g, splits, axis=axis)):
            if x.requires_grad:
                x._accumulate(gx)

    out._backward = backward
    return out


def gather(x, idx) -> Tensor:
    """Row selection ``x[idx]`` (integer array or slice along axis 0)."""
    x = as_tensor(x)
    out = Tensor(x.value[idx], (x,))

    def backward(g):
        full = np.zeros_like(x.value)
        if isinstance(idx, slice):
            full[idx] = g
        else:
            full = kernels.segment_sum(g, np.asarray(idx), x.shape[0])
        x._accumulate(full)

    out._backward = backward
    return out


def segment_sum(x, index, n) -> Tensor:
    """Scatter-add rows of ``x`` into ``n`` buckets."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    out = Tensor(kernels.segment_sum(x.value, index, n), (x,))

    def backward(g):
        x._accumulate(g[index])

    out._backward = backward
    return out
