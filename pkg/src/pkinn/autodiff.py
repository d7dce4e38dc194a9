"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every operation records its parents and a vector-Jacobian product. Derivatives
of network outputs with respect to inputs are built out of the same primitives
(see :mod:`pkinn.nn`), so gradients of objectives containing them come out of
a single reverse sweep.
"""

from __future__ import annotations

from numbers import Real

import numpy as np

from .errors import GraphError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("value", "parents", "vjp", "op")

    _UFUNC_OPS = {
        np.add: lambda a, b: a + b,
        np.subtract: lambda a, b: a - b,
        np.multiply: lambda a, b: a * b,
        np.true_divide: lambda a, b: a / b,
        np.matmul: lambda a, b: a @ b,
    }

    def __init__(self, value, parents=(), vjp=None, op="leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        self.op = op

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        op = self._UFUNC_OPS.get(ufunc)
        if op is None or method != "__call__" or kwargs or len(inputs) != 2:
            raise GraphError(f"unsupported primitive: numpy.{ufunc.__name__}")
        return op(as_tensor(inputs[0]), as_tensor(inputs[1]))

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self) -> Tensor:
        return Tensor(self.value.T, (self,), lambda g: (g.T,), "transpose")

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"

    # arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(
            self.value + other.value,
            (self, other),
            lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)),
            "add",
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.value, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        av, bv = self.value, other.value
        return Tensor(
            av * bv,
            (self, other),
            lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
            "mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        av, bv = self.value, other.value
        out = av / bv
        return Tensor(
            out,
            (self, other),
            lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * out / bv, bv.shape)),
            "div",
        )

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent):
        if exponent != 2:
            raise GraphError(f"unsupported primitive: power {exponent!r} (only squaring is differentiable here)")
        return square(self)

    def __matmul__(self, other):
        other = as_tensor(other)
        av, bv = self.value, other.value
        if av.ndim != 2 or bv.ndim != 2:
            raise GraphError("matmul supports 2-D operands only")
        return Tensor(av @ bv, (self, other), lambda g: (g @ bv.T, av.T @ g), "matmul")

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    def __getitem__(self, index):
        shape = self.shape

        def vjp(g):
            full = np.zeros(shape)
            np.add.at(full, index, g)
            return (full,)

        return Tensor(self.value[index], (self,), vjp, "index")

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self):
        return mean(self)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (Real, np.ndarray, np.floating, np.integer)) and not isinstance(x, bool):
        arr = np.asarray(x)
        if arr.dtype.kind not in "fiu":
            raise GraphError(f"unsupported operand dtype {arr.dtype}")
        return Tensor(arr)
    raise GraphError(f"unsupported operand of type {type(x).__name__}")


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.value)
    return Tensor(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def square(x: Tensor) -> Tensor:
    x = as_tensor(x)
    v = x.value
    return Tensor(v * v, (x,), lambda g: (2.0 * g * v,), "square")


def sqrt(x: Tensor) -> Tensor:
    """Square root; the (infinite) derivative at 0 is replaced by 0."""
    x = as_tensor(x)
    out = np.sqrt(x.value)

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(out > 0, 0.5 / out, 0.0)
        return (g * d,)

    return Tensor(out, (x,), vjp, "sqrt")


def tsum(x: Tensor, axis=None) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    if axis is None:
        return Tensor(x.value.sum(), (x,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")

    def vjp(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Tensor(x.value.sum(axis=axis), (x,), vjp, "sum")


def mean(x: Tensor) -> Tensor:
    x = as_tensor(x)
    n = x.value.size
    return tsum(x) * (1.0 / n)


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor(np.concatenate([p.value for p in parts], axis=axis), tuple(parts), vjp, "concat")


def _toposort(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
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
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(output: Tensor, inputs) -> list[np.ndarray]:
    """Gradient of a scalar ``output`` with respect to each tensor in ``inputs``.

    Inputs that do not influence the output receive zero arrays.
    """
    inputs = list(inputs)
    if not isinstance(output, Tensor):
        raise GraphError("objective is not a graph tensor")
    if output.value.size != 1:
        raise GraphError(f"objective must be scalar, got shape {output.shape}")
    keep = {id(x) for x in inputs}
    grads = {id(output): np.ones_like(output.value)}
    for node in reversed(_toposort(output)):
        g = grads.get(id(node)) if id(node) in keep else grads.pop(id(node), None)
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return [np.asarray(grads.get(id(x), np.zeros_like(x.value))).reshape(x.shape) for x in inputs]
