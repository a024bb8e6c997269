"""Compactly supported C^4 profiles in the squared radius.

Profiles are written in the squared radius so that jets never need a square
root at the centre.  Each works on floats, arrays and :class:`TaylorJet`.
"""
from __future__ import annotations

import numpy as np

from .jets import is_jet

# 1 - (126 t^5 - 420 t^6 + 540 t^7 - 315 t^8 + 70 t^9): C^4 at both ends
_STEP = np.array([126.0, -420.0, 540.0, -315.0, 70.0])


def _step_poly(t):
    acc = 0.0
    for c in _STEP[::-1]:
        acc = acc * t + c
    return 1.0 - acc * t**5


def _step_poly_deriv(t):
    d = np.array([5 * 126.0, -6 * 420.0, 7 * 540.0, -8 * 315.0, 9 * 70.0])
    acc = 0.0
    for c in d[::-1]:
        acc = acc * t + c
    return -acc * t**4


def plateau(rho, inner, outer):
    """1 for ``rho <= inner``, 0 for ``rho >= outer``, C^4 in between."""
    if is_jet(rho):
        v = rho.value
        if v <= inner:
            return rho * 0.0 + 1.0
        if v >= outer:
            return rho * 0.0
        return _step_poly((rho - inner) / (outer - inner))
    rho = np.asarray(rho, dtype=float)
    t = np.clip((rho - inner) / (outer - inner), 0.0, 1.0)
    return _step_poly(t)


def plateau_deriv(rho, inner, outer):
    """Derivative of :func:`plateau` with respect to ``rho``."""
    width = outer - inner
    if is_jet(rho):
        v = rho.value
        if v <= inner or v >= outer:
            return rho * 0.0
        return _step_poly_deriv((rho - inner) / width) / width
    rho = np.asarray(rho, dtype=float)
    t = np.clip((rho - inner) / width, 0.0, 1.0)
    return _step_poly_deriv(t) / width


def _step_poly_deriv2(t):
    d = np.array([20 * 126.0, -30 * 420.0, 42 * 540.0, -56 * 315.0, 72 * 70.0])
    acc = 0.0
    for c in d[::-1]:
        acc = acc * t + c
    return -acc * t**3


def plateau_deriv2(rho, inner, outer):
    width = outer - inner
    rho = np.asarray(rho, dtype=float)
    t = np.clip((rho - inner) / width, 0.0, 1.0)
    return _step_poly_deriv2(t) / width**2
