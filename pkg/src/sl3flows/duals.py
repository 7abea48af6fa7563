"""Nestable forward-mode dual numbers.

A :class:`Dual` carries a value and a tangent.  Components may themselves
be duals (nesting gives exact higher-order mixed derivatives) or numpy
arrays (one pass then propagates several tangent directions at once).
Only the operations needed by the field DSL are implemented.
"""

from __future__ import annotations

import math

import numpy as np


class Dual:
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __repr__(self):
        return f"Dual({self.a!r}, {self.b!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.a + other.a, self.b + other.b)
        return Dual(self.a + other, self.b)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.a - other.a, self.b - other.b)
        return Dual(self.a - other, self.b)

    def __rsub__(self, other):
        return Dual(other - self.a, -self.b)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.a * other.a, self.a * other.b + self.b * other.a)
        return Dual(self.a * other, self.b * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.a
            return Dual(self.a * inv, (self.b - self.a * inv * other.b) * inv)
        return Dual(self.a / other, self.b / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.a
        val = other * inv
        return Dual(val, -val * inv * self.b)

    def __neg__(self):
        return Dual(-self.a, -self.b)

    def __pow__(self, n):
        if isinstance(n, Dual):
            return dexp(n * dlog(self))
        if n == 0:
            return Dual(self.a * 0.0 + 1.0, self.b * 0.0)
        if n == 1:
            return self
        return Dual(self.a ** n, n * self.a ** (n - 1) * self.b)

    def __rpow__(self, base):
        return dexp(self * math.log(base))


def _lift(fn_math, fn_np, dfn):
    def wrapped(x):
        if isinstance(x, Dual):
            return Dual(wrapped(x.a), dfn(x.a) * x.b)
        if isinstance(x, np.ndarray):
            return fn_np(x)
        return fn_math(x)

    return wrapped


def _d_sin(a):
    return dcos(a)


def _d_cos(a):
    return -dsin(a)


def _d_exp(a):
    return dexp(a)


def _d_tanh(a):
    t = dtanh(a)
    return 1.0 - t * t


def _d_log(a):
    return 1.0 / a


dsin = _lift(math.sin, np.sin, _d_sin)
dcos = _lift(math.cos, np.cos, _d_cos)
dexp = _lift(math.exp, np.exp, _d_exp)
dtanh = _lift(math.tanh, np.tanh, _d_tanh)
dlog = _lift(math.log, np.log, _d_log)


def value(x):
    """Peel all dual levels off x, returning the underlying primal value."""
    while isinstance(x, Dual):
        x = x.a
    return x


def tangent(x):
    """Top-level tangent of x (zero for a plain number)."""
    return x.b if isinstance(x, Dual) else 0.0
