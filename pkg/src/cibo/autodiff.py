"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tensor`` wraps an ndarray and records the operation that produced it as a
closure. Calling :meth:`Tensor.backward` on a scalar walks the recorded graph
once in reverse topological order and accumulates gradients into every node
that requires them. The op set is deliberately small: exactly what dense MLP
training, flow-matching losses, and trajectory-balance losses need.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "as_tensor",
    "gelu",
    "gelu_grad",
    "gradients",
    "NonFiniteError",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or infinity shows up where finite values are required."""


def require_finite(arr: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {context}")


def gelu(x):
    """Exact Gaussian error linear unit, x * Phi(x), via erf."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x):
    """Derivative of exact GELU: Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
    return cdf + x * pdf


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
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
    """A node in the reverse-mode tape.

    Leaf tensors (parameters) are created with ``requires_grad=True`` and an
    optional ``name`` used in error reports. Interior nodes are produced by the
    arithmetic methods below; each stores the parent nodes and a closure that
    routes the output gradient back to them.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _result(data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # -- ops ------------------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out_data = self.data + other.data

        def backward(g):
            return (_unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape))

        return Tensor._result(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            return (-g,)

        return Tensor._result(-self.data, (self,), backward)

    def __sub__(self, other):
        other = as_tensor(other)
        out_data = self.data - other.data

        def backward(g):
            return (_unbroadcast(g, self.data.shape), _unbroadcast(-g, other.data.shape))

        return Tensor._result(out_data, (self, other), backward)

    def __rsub__(self, other):
        return as_tensor(other).__sub__(self)

    def __mul__(self, other):
        other = as_tensor(other)
        out_data = self.data * other.data

        def backward(g):
            return (
                _unbroadcast(g * other.data, self.data.shape),
                _unbroadcast(g * self.data, other.data.shape),
            )

        return Tensor._result(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = as_tensor(other)
        out_data = self.data @ other.data

        def backward(g):
            return (g @ other.data.T, self.data.T @ g)

        return Tensor._result(out_data, (self, other), backward)

    def square(self):
        def backward(g):
            return (2.0 * self.data * g,)

        return Tensor._result(self.data * self.data, (self,), backward)

    def sum(self, axis: int | None = None):
        out_data = self.data.sum(axis=axis)

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, self.data.shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g, axis), self.data.shape).copy(),)

        return Tensor._result(out_data, (self,), backward)

    def mean(self):
        n = self.data.size

        def backward(g):
            return (np.broadcast_to(g / n, self.data.shape).copy(),)

        return Tensor._result(self.data.mean(), (self,), backward)

    def reshape(self, *shape):
        old = self.data.shape

        def backward(g):
            return (g.reshape(old),)

        return Tensor._result(self.data.reshape(*shape), (self,), backward)

    def gelu(self):
        x = self.data
        cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))  # reused in backward

        def backward(g):
            pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
            return (g * (cdf + x * pdf),)

        return Tensor._result(x * cdf, (self,), backward)

    # -- backward pass --------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable node."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, pg in zip(node._parents, parent_grads):
                if not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += pg


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def gradients(loss: Tensor, params: list[Tensor]) -> list[np.ndarray]:
    """Gradient of `loss` for each tensor in `params`.

    Parameters not reachable from the loss get a zero gradient. Raises
    :class:`NonFiniteError` naming the offending parameter when a gradient
    contains NaN or infinity.
    """
    for p in params:
        p.grad = None
    loss.backward()
    out = []
    for i, p in enumerate(params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            label = p.name or f"param[{i}]"
            raise NonFiniteError(f"non-finite gradient for {label}")
        out.append(g)
    return out
