"""Truncated bivariate Taylor arithmetic (degree <= 3).

A :class:`TaylorJet` is a polynomial in the displacement ``h = (h1, h2)`` from a
basepoint, truncated at total degree ``order``.  Map formulas are written once
against :func:`sin`, :func:`cos` and ordinary operators; fed floats they
evaluate the map, fed jets they return its exact Taylor expansion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOrderError

MAX_ORDER = 3
_N = MAX_ORDER + 1

_I, _J = np.meshgrid(np.arange(_N), np.arange(_N), indexing="ij")
_DEG = _I + _J


def _product_tables(order):
    ia, ja = _I.ravel(), _J.ravel()
    si = ia[:, None] + ia[None, :]
    sj = ja[:, None] + ja[None, :]
    keep = (si + sj) <= order
    target = (si * _N + sj)[keep]
    return keep, target


_TABLES = {k: _product_tables(k) for k in range(MAX_ORDER + 1)}


def _check_order(order):
    if not 0 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(f"jet order must be in 0..{MAX_ORDER}, got {order}")


class TaylorJet:
    """Scalar truncated Taylor polynomial in two variables.

    ``coeffs[i, j]`` multiplies ``h1**i * h2**j``; entries with ``i + j > order``
    are always zero.
    """

    __slots__ = ("coeffs", "order")
    __array_ufunc__ = None  # make numpy scalars defer to our reflected ops

    def __init__(self, coeffs, order=MAX_ORDER):
        _check_order(order)
        c = np.array(coeffs, dtype=float)
        if c.shape != (_N, _N):
            raise ValueError("coeffs must have shape (4, 4)")
        c[_DEG > order] = 0.0
        self.coeffs = c
        self.order = order

    @classmethod
    def constant(cls, value, order=MAX_ORDER):
        c = np.zeros((_N, _N))
        c[0, 0] = value
        return cls(c, order)

    @classmethod
    def variable(cls, value, index, order=MAX_ORDER):
        """The coordinate function ``x_index`` expanded at ``x_index = value``."""
        c = np.zeros((_N, _N))
        c[0, 0] = value
        if order >= 1:
            c[(1, 0) if index == 0 else (0, 1)] = 1.0
        return cls(c, order)

    @property
    def value(self):
        return float(self.coeffs[0, 0])

    def gradient(self):
        return np.array([self.coeffs[1, 0], self.coeffs[0, 1]])

    def _coerce(self, other):
        if isinstance(other, TaylorJet):
            return other
        return TaylorJet.constant(float(other), self.order)

    def _new(self, coeffs, order):
        out = TaylorJet.__new__(TaylorJet)
        out.coeffs = coeffs
        out.order = order
        return out

    def __add__(self, other):
        o = self._coerce(other)
        order = min(self.order, o.order)
        c = self.coeffs + o.coeffs
        c[_DEG > order] = 0.0
        return self._new(c, order)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, TaylorJet):
            return self._new(self.coeffs * float(other), self.order)
        order = min(self.order, other.order)
        keep, target = _TABLES[order]
        prod = np.outer(self.coeffs.ravel(), other.coeffs.ravel())[keep]
        c = np.bincount(target, weights=prod, minlength=_N * _N).reshape(_N, _N)
        return self._new(c, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorJet):
            return self * other.reciprocal()
        return self._new(self.coeffs / float(other), self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = TaylorJet.constant(1.0, self.order)
        for _ in range(n):
            out = out * self
        return out

    def apply(self, derivatives):
        """Compose a scalar function with this jet.

        ``derivatives[k]`` is the k-th derivative of the function at ``self.value``.
        """
        delta = self - self.value
        out = TaylorJet.constant(derivatives[0], self.order)
        power = TaylorJet.constant(1.0, self.order)
        for k in range(1, self.order + 1):
            power = power * delta
            out = out + power * (derivatives[k] / math.factorial(k))
        return out

    def reciprocal(self):
        a = self.value
        return self.apply([1 / a, -1 / a**2, 2 / a**3, -6 / a**4])

    def sin(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self.apply([s, c, -s, -c])

    def cos(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self.apply([c, -s, -c, s])

    def exp(self):
        e = math.exp(self.value)
        return self.apply([e, e, e, e])

    def sqrt(self):
        a = self.value
        r = math.sqrt(a)
        return self.apply([r, 0.5 / r, -0.25 / (a * r), 0.375 / (a * a * r)])

    def __call__(self, h1, h2):
        """Evaluate the polynomial at displacement ``(h1, h2)``."""
        total = 0.0
        for i in range(self.order + 1):
            for j in range(self.order + 1 - i):
                total = total + self.coeffs[i, j] * h1**i * h2**j
        return total

    def __repr__(self):
        return f"TaylorJet(order={self.order}, value={self.value:.6g})"


def sin(x):
    return x.sin() if isinstance(x, TaylorJet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, TaylorJet) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, TaylorJet) else np.exp(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, TaylorJet) else np.sqrt(x)


def is_jet(x):
    return isinstance(x, TaylorJet)


def compose_scalar(outer, inner1, inner2):
    """``outer(inner1 - inner1.value, inner2 - inner2.value)`` as a jet.

    ``outer`` is a jet in displacement variables; the inner jets give the
    displacement as functions of new variables.
    """
    order = min(outer.order, inner1.order, inner2.order)
    d1 = inner1 - inner1.value
    d2 = inner2 - inner2.value
    pow1 = [TaylorJet.constant(1.0, order)]
    pow2 = [TaylorJet.constant(1.0, order)]
    for _ in range(order):
        pow1.append(pow1[-1] * d1)
        pow2.append(pow2[-1] * d2)
    out = TaylorJet.constant(0.0, order)
    for i in range(order + 1):
        for j in range(order + 1 - i):
            a = outer.coeffs[i, j]
            if a != 0.0:
                out = out + pow1[i] * pow2[j] * a
    return out


@dataclass(frozen=True)
class Jet2:
    """Taylor jet of a planar map germ at ``base``.

    ``coeffs[k, i, j]`` is the coefficient of ``h1**i h2**j`` in component ``k``;
    ``coeffs[:, 0, 0]`` is the image of ``base``.
    """

    base: np.ndarray
    coeffs: np.ndarray
    order: int

    @classmethod
    def from_components(cls, base, comp1, comp2):
        order = min(comp1.order, comp2.order)
        return cls(np.asarray(base, dtype=float), np.stack([comp1.coeffs, comp2.coeffs]), order)

    def components(self):
        return TaylorJet(self.coeffs[0], self.order), TaylorJet(self.coeffs[1], self.order)

    @property
    def value(self):
        return self.coeffs[:, 0, 0].copy()

    @property
    def linear(self):
        """The Jacobian matrix at ``base``."""
        return np.array(
            [[self.coeffs[0, 1, 0], self.coeffs[0, 0, 1]], [self.coeffs[1, 1, 0], self.coeffs[1, 0, 1]]]
        )

    def compose(self, inner: "Jet2") -> "Jet2":
        """Jet of ``self ∘ inner`` at ``inner.base``; ``self`` must be based at ``inner``'s image.

        Only displacements enter, so a torus lift and its reduction compose alike.
        """
        a1, a2 = inner.components()
        o1, o2 = self.components()
        c1 = compose_scalar(o1, a1, a2)
        c2 = compose_scalar(o2, a1, a2)
        return Jet2.from_components(inner.base, c1, c2)

    def __call__(self, h):
        c1, c2 = self.components()
        return np.array([c1(h[0], h[1]), c2(h[0], h[1])])

    def max_abs_diff(self, other: "Jet2") -> float:
        return float(np.max(np.abs(self.coeffs - other.coeffs)))


def linear_jet(base, matrix, offset=None, order=MAX_ORDER):
    """Jet of the affine map ``h -> offset + matrix @ h`` based at ``base``."""
    m = np.asarray(matrix, dtype=float)
    off = np.zeros(2) if offset is None else np.asarray(offset, dtype=float)
    comps = []
    for k in range(2):
        c = np.zeros((_N, _N))
        c[0, 0] = off[k]
        c[1, 0] = m[k, 0]
        c[0, 1] = m[k, 1]
        comps.append(TaylorJet(c, order))
    return Jet2.from_components(base, *comps)
