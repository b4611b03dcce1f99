"""Array-level reverse-mode differentiation.

Each :class:`Var` stores its value and the vector-Jacobian products that
carry an incoming gradient back to its parents. Only the handful of ops
the training losses need are provided.
"""
from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("value", "parents")
    __array_priority__ = 100

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=float)
        self.parents = parents

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_var(other)))

    def __rsub__(self, other):
        return add(as_var(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_var(other), self)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def stop_grad(x) -> Var:
    """Same value, no path back to the parameters."""
    return Var(x.value if isinstance(x, Var) else x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(a.value + b.value,
               ((a, lambda g: _unbroadcast(g, a.shape)),
                (b, lambda g: _unbroadcast(g, b.shape))))


def neg(a) -> Var:
    return Var(-a.value, ((a, lambda g: -g),))


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    return Var(av * bv,
               ((a, lambda g: _unbroadcast(g * bv, a.shape)),
                (b, lambda g: _unbroadcast(g * av, b.shape))))


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    return Var(av @ bv, ((a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)))


def silu(a) -> Var:
    x = a.value
    with np.errstate(over="ignore"):
        s = 1.0 / (1.0 + np.exp(-x))
    return Var(x * s, ((a, lambda g: g * (s * (1.0 + x * (1.0 - s)))),))


def square(a) -> Var:
    x = a.value
    return Var(x * x, ((a, lambda g: 2.0 * g * x),))


def sum_last(a) -> Var:
    """Row sums of a 2-D array."""
    shape = a.shape
    return Var(a.value.sum(axis=-1), ((a, lambda g: np.broadcast_to(g[..., None], shape)),))


def mean(a) -> Var:
    n = a.value.size
    shape = a.shape
    return Var(a.value.mean(), ((a, lambda g: np.full(shape, g / n)),))


def concat(parts) -> Var:
    parts = [as_var(p) for p in parts]
    edges = np.cumsum([0] + [p.shape[-1] for p in parts])
    return Var(np.concatenate([p.value for p in parts], axis=-1),
               tuple((p, (lambda g, lo=lo, hi=hi: g[..., lo:hi]))
                     for p, lo, hi in zip(parts, edges[:-1], edges[1:])))


def take(a, start: int, stop: int, shape) -> Var:
    """Reshaped view of the flat slice ``a[start:stop]``."""
    n = a.value.size

    def vjp(g):
        out = np.zeros(n)
        out[start:stop] = g.ravel()
        return out

    return Var(a.value[start:stop].reshape(shape), ((a, vjp),))


def backward(root: Var, wrt):
    """Gradients of scalar ``root`` with respect to each Var in ``wrt``."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    grads = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None) if node.parents else grads.get(id(node))
        if g is None or not node.parents:
            continue
        for parent, vjp in node.parents:
            contrib = vjp(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = contrib
    return [np.asarray(grads.get(id(w), np.zeros_like(w.value)), dtype=float) for w in wrt]
