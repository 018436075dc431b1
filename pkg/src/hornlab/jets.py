"""Truncated Taylor arithmetic ("jets") for exact derivatives of closed forms.

A :class:`Jet` stores normalized Taylor coefficients ``c[k] = f^(k)(x0) / k!``
for ``k = 0..order`` along the leading axis; trailing axes vectorize over
evaluation points. Arithmetic follows the usual recurrences of forward-mode
automatic differentiation, so derivatives of the glued profiles are exact up
to rounding.
"""

from math import factorial

import numpy as np

__all__ = ["Jet", "exp", "log", "sin", "cos", "sqrt", "power", "where"]


class Jet:
    __slots__ = ("c",)
    __array_priority__ = 1000

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, x, order):
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order, shape=()):
        c = np.zeros((order + 1,) + tuple(shape))
        c[0] = value
        return cls(c)

    @property
    def order(self):
        return self.c.shape[0] - 1

    @property
    def value(self):
        return self.c[0]

    def derivatives(self):
        """Return ``f^(k)`` for ``k = 0..order`` stacked along axis 0."""
        fact = np.array([factorial(k) for k in range(self.order + 1)], dtype=float)
        return self.c * fact.reshape((-1,) + (1,) * (self.c.ndim - 1))

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        out = np.zeros_like(self.c)
        out[0] = other
        return Jet(out)

    def __neg__(self):
        return Jet(-self.c)

    def __add__(self, other):
        return Jet(self.c + self._lift(other).c)

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.c - self._lift(other).c)

    def __rsub__(self, other):
        return Jet(self._lift(other).c - self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self.c, other.c
        n = self.order
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(n + 1):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        a, b = self.c, other.c
        n = self.order
        q = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for k in range(n + 1):
            acc = a[k] - sum(b[j] * q[k - j] for j in range(1, k + 1))
            q[k] = acc / b[0]
        return Jet(q)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return Jet(self.c[(slice(None),) + np.index_exp[idx]])

    def __repr__(self):
        return f"Jet(order={self.order}, value={self.c[0]!r})"


def exp(u):
    c = u.c
    e = np.zeros_like(c)
    e[0] = np.exp(c[0])
    for k in range(1, u.order + 1):
        e[k] = sum(j * c[j] * e[k - j] for j in range(1, k + 1)) / k
    return Jet(e)


def log(u):
    c = u.c
    out = np.zeros_like(c)
    out[0] = np.log(c[0])
    for k in range(1, u.order + 1):
        acc = c[k] - sum(j * out[j] * c[k - j] for j in range(1, k)) / k
        out[k] = acc / c[0]
    return Jet(out)


def _sincos(u):
    c = u.c
    s = np.zeros_like(c)
    co = np.zeros_like(c)
    s[0] = np.sin(c[0])
    co[0] = np.cos(c[0])
    for k in range(1, u.order + 1):
        s[k] = sum(j * c[j] * co[k - j] for j in range(1, k + 1)) / k
        co[k] = -sum(j * c[j] * s[k - j] for j in range(1, k + 1)) / k
    return Jet(s), Jet(co)


def sin(u):
    return _sincos(u)[0]


def cos(u):
    return _sincos(u)[1]


def power(u, p):
    """``u**p`` for real ``p``; requires ``u.value > 0`` unless ``p`` is a
    nonnegative integer."""
    if float(p).is_integer() and p >= 0:
        out = Jet.constant(1.0, u.order, u.c.shape[1:])
        for _ in range(int(p)):
            out = out * u
        return out
    c = u.c
    v = np.zeros_like(c)
    v[0] = c[0] ** p
    for k in range(1, u.order + 1):
        acc = sum((p * j - (k - j)) * c[j] * v[k - j] for j in range(1, k + 1))
        v[k] = acc / (k * c[0])
    return Jet(v)


def sqrt(u):
    return power(u, 0.5)


def where(cond, a, b):
    """Pointwise selection between two jets (or scalars) of equal order."""
    cond = np.asarray(cond, dtype=bool)
    if not isinstance(a, Jet):
        a = b._lift(a)
    if not isinstance(b, Jet):
        b = a._lift(b)
    return Jet(np.where(cond, a.c, b.c))
