"""Forward-mode dual numbers with a full gradient, plus array-valued jets.

A :class:`Dual` carries a real value and its gradient with respect to every
coordinate of the base space, so one evaluation yields all first partials.
A :class:`Jet` is the array analogue: ``value`` has shape ``S`` and ``deriv``
has shape ``S + (m,)`` with the derivative index last.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np


class Dual:
    __slots__ = ("value", "grad")

    def __init__(self, value: float, grad: np.ndarray):
        self.value = float(value)
        self.grad = grad

    @classmethod
    def variable(cls, value: float, index: int, dim: int) -> "Dual":
        g = np.zeros(dim)
        g[index] = 1.0
        return cls(value, g)

    @classmethod
    def constant(cls, value: float, dim: int) -> "Dual":
        return cls(value, np.zeros(dim))

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.grad!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.grad + other.grad)
        return Dual(self.value + other, self.grad)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.grad - other.grad)
        return Dual(self.value - other, self.grad)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.grad)

    def __neg__(self):
        return Dual(-self.value, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value, self.value * other.grad + other.value * self.grad)
        return Dual(self.value * other, other * self.grad)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.value
            v = self.value * inv
            return Dual(v, (self.grad - v * other.grad) * inv)
        return Dual(self.value / other, self.grad / other)

    def __rtruediv__(self, other):
        v = other / self.value
        return Dual(v, (-v / self.value) * self.grad)

    def __pow__(self, other):
        if isinstance(other, Dual):
            if not other.grad.any():
                return self ** other.value
            # x^y with variable exponent: exp(y log x), x > 0
            lx = math.log(self.value)
            v = self.value ** other.value
            return Dual(v, v * (other.value / self.value * self.grad + lx * other.grad))
        if other == 0:
            return Dual(1.0, np.zeros_like(self.grad))
        v = self.value ** other
        if other == 1:
            return Dual(v, self.grad.copy())
        return Dual(v, (other * self.value ** (other - 1)) * self.grad)

    def __rpow__(self, other):
        v = other ** self.value
        if v == 0.0:
            return Dual(0.0, np.zeros_like(self.grad))
        return Dual(v, (v * math.log(other)) * self.grad)


Number = Union[float, Dual]


def exp(x: Number) -> Number:
    if isinstance(x, Dual):
        v = math.exp(x.value)
        return Dual(v, v * x.grad)
    return math.exp(x)


def log(x: Number) -> Number:
    if isinstance(x, Dual):
        return Dual(math.log(x.value), x.grad / x.value)
    return math.log(x)


def sin(x: Number) -> Number:
    if isinstance(x, Dual):
        return Dual(math.sin(x.value), math.cos(x.value) * x.grad)
    return math.sin(x)


def cos(x: Number) -> Number:
    if isinstance(x, Dual):
        return Dual(math.cos(x.value), -math.sin(x.value) * x.grad)
    return math.cos(x)


def sqrt(x: Number) -> Number:
    if isinstance(x, Dual):
        v = math.sqrt(x.value)
        return Dual(v, (0.5 / v) * x.grad)
    return math.sqrt(x)


def value_of(x: Number) -> float:
    return x.value if isinstance(x, Dual) else float(x)


class Jet:
    """Array-valued first-order jet: ``value`` with shape S, ``deriv`` with shape S + (m,)."""

    __slots__ = ("value", "deriv")

    def __init__(self, value: np.ndarray, deriv: np.ndarray):
        self.value = np.asarray(value, dtype=float)
        self.deriv = np.asarray(deriv, dtype=float)

    @property
    def dim(self) -> int:
        return self.deriv.shape[-1]

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @classmethod
    def constant(cls, value, dim: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (dim,)))

    @classmethod
    def identity(cls, m: int, dim: int) -> "Jet":
        return cls.constant(np.eye(m), dim)

    @classmethod
    def from_duals(cls, entries, dim: int) -> "Jet":
        """Pack a (nested) sequence of Dual/float entries into a jet."""
        arr = np.array(entries, dtype=object)
        value = np.zeros(arr.shape)
        deriv = np.zeros(arr.shape + (dim,))
        for idx, e in np.ndenumerate(arr):
            if isinstance(e, Dual):
                value[idx] = e.value
                deriv[idx] = e.grad
            else:
                value[idx] = float(e)
        return cls(value, deriv)

    def entry(self, *idx) -> Dual:
        return Dual(self.value[idx], self.deriv[idx].copy())

    def pad(self, dim: int, offset: int = 0) -> "Jet":
        """Embed the derivative axis into a larger coordinate space (e.g. Q into T*Q)."""
        d = np.zeros(self.value.shape + (dim,))
        d[..., offset:offset + self.dim] = self.deriv
        return Jet(self.value, d)

    @property
    def T(self) -> "Jet":
        return Jet(self.value.T, np.swapaxes(self.deriv, 0, 1))

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.deriv + other.deriv)
        return Jet(self.value + other, self.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value - other.value, self.deriv - other.deriv)
        return Jet(self.value - other, self.deriv)

    def __neg__(self):
        return Jet(-self.value, -self.deriv)

    def __mul__(self, other):
        """Scale by a float or a scalar Dual (elementwise for same-shape jets)."""
        if isinstance(other, Dual):
            return Jet(other.value * self.value,
                       other.value * self.deriv + self.value[..., None] * other.grad)
        if isinstance(other, Jet):
            return Jet(self.value * other.value,
                       self.value[..., None] * other.deriv + other.value[..., None] * self.deriv)
        return Jet(other * self.value, other * self.deriv)

    __rmul__ = __mul__

    def __matmul__(self, other: "Jet") -> "Jet":
        a, b = self.value, other.value
        if b.ndim == 1:
            return Jet(a @ b, np.einsum("ijc,j->ic", self.deriv, b) + np.einsum("ij,jc->ic", a, other.deriv))
        return Jet(a @ b, np.einsum("ijc,jk->ikc", self.deriv, b) + np.einsum("ij,jkc->ikc", a, other.deriv))

    def trace(self) -> Dual:
        return Dual(np.trace(self.value), np.einsum("iic->c", self.deriv))


def stack_duals(duals: Sequence[Number], dim: int) -> Jet:
    return Jet.from_duals(list(duals), dim)
