"""Birkhoff normal form at elliptic points and the first Birkhoff coefficient.

The map germ is written in a symplectic frame where its linear part is a
rotation, complexified as ``z = x + i y`` and simplified degree by degree.
Polynomials in ``(z, conj z)`` are stored as arrays ``C[j, k]`` multiplying
``z**j * conj(z)**k``, truncated at total degree 3.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, InsufficientDataError, ResonanceError
from .jets import Jet2
from .periodic import ELLIPTIC, TOL_HYP, TOL_RES, classify_multipliers

log = logging.getLogger(__name__)

DEG = 3
_N = DEG + 1
_J, _K = np.meshgrid(np.arange(_N), np.arange(_N), indexing="ij")
_TOTAL = _J + _K


@dataclass
class NormalFormData:
    lambda_p: complex
    a1: float
    resonance_flags: tuple
    frame: np.ndarray
    remainder_norm: float
    period: int = 1
    point: np.ndarray | None = None

    def to_dict(self):
        return {
            "lambda_p": [float(self.lambda_p.real), float(self.lambda_p.imag)],
            "a1": float(self.a1),
            "resonance_flags": [bool(v) for v in self.resonance_flags],
            "frame": self.frame.tolist(),
            "remainder_norm": float(self.remainder_norm),
            "period": int(self.period),
            "point": None if self.point is None else [float(v) for v in self.point],
        }


# -- truncated polynomials in (z, zbar) ------------------------------------

def _mul(a, b):
    out = np.zeros((_N, _N), complex)
    for j in range(_N):
        for k in range(_N - j):
            if a[j, k] == 0:
                continue
            for m in range(_N - j - k):
                for n in range(_N - j - k - m):
                    out[j + m, k + n] += a[j, k] * b[m, n]
    return out


def _conj(a):
    """Coefficients of ``conj(P(z, zbar))`` as a polynomial in ``(z, zbar)``."""
    return np.conj(a).T


def _one():
    c = np.zeros((_N, _N), complex)
    c[0, 0] = 1.0
    return c


def _identity():
    c = np.zeros((_N, _N), complex)
    c[1, 0] = 1.0
    return c


def _compose(p, a):
    """``p(a(w), conj(a(w)))`` for ``a`` with no constant term."""
    ab = _conj(a)
    pa, pb = [_one()], [_one()]
    for _ in range(DEG):
        pa.append(_mul(pa[-1], a))
        pb.append(_mul(pb[-1], ab))
    out = np.zeros((_N, _N), complex)
    for j in range(_N):
        for k in range(_N - j):
            if p[j, k] != 0:
                out += p[j, k] * _mul(pa[j], pb[k])
    return out


def _inverse(h):
    """Inverse of a near-identity change ``h = id + higher order``."""
    higher = h - _identity()
    w = _identity()
    for _ in range(DEG):
        w = _identity() - _compose(higher, w)
    return w


def _real_to_complex(jet: Jet2):
    """Complex polynomial ``z' = X + iY`` of a real jet with zero constant term."""
    u = np.zeros((_N, _N), complex)  # x = (z + zbar)/2
    u[1, 0], u[0, 1] = 0.5, 0.5
    v = np.zeros((_N, _N), complex)  # y = (z - zbar)/(2i)
    v[1, 0], v[0, 1] = -0.5j, 0.5j
    pu, pv = [_one()], [_one()]
    for _ in range(DEG):
        pu.append(_mul(pu[-1], u))
        pv.append(_mul(pv[-1], v))
    out = np.zeros((_N, _N), complex)
    for i in range(_N):
        for j in range(_N - i):
            coef = jet.coeffs[0, i, j] + 1j * jet.coeffs[1, i, j]
            if i + j > 0 and coef != 0:
                out += coef * _mul(pu[i], pv[j])
    return out


def _eliminate(g, lam, degree):
    """Conjugate away every non-resonant monomial of the given degree."""
    phi = np.zeros((_N, _N), complex)
    for j in range(degree + 1):
        k = degree - j
        if j - k == 1:
            continue
        phi[j, k] = g[j, k] / (lam ** (j - k) - lam)
    h = _identity() + phi
    return _compose(_inverse(h), _compose(g, h))


# -- frame -----------------------------------------------------------------

def symplectic_frame(M):
    """Area-one frame ``P`` with ``P^-1 M P`` a rotation; returns ``(P, lambda)``.

    The eigenvalue is the one whose frame ``[Re v, -Im v]`` is positively
    oriented, so the rotation angle carries the map's own sense of turning.
    """
    w, V = np.linalg.eig(M)
    for idx in range(2):
        v = V[:, idx]
        P = np.column_stack([v.real, -v.imag])
        d = np.linalg.det(P)
        if d > 0:
            return P / np.sqrt(d), complex(w[idx])
    raise ClassificationError("linear part has no rotation frame (real spectrum)")


def _conjugate_jet(jet: Jet2, P):
    """Jet of ``P^-1 (g(p + P h) - p)`` as a Jet2 in frame coordinates."""
    from .jets import linear_jet

    zero = np.zeros(2)
    Pinv = np.linalg.inv(P)
    inner = linear_jet(zero, P, order=jet.order)
    moved = Jet2(zero, jet.coeffs.copy(), jet.order)
    moved.coeffs[:, 0, 0] = 0.0
    g = moved.compose(inner)
    outer = linear_jet(zero, Pinv, order=jet.order)
    return outer.compose(g)


def normal_form_from_jet(jet: Jet2, tol_res=TOL_RES, tol_hyp=TOL_HYP, period=1, point=None):
    """Normal-form data of a germ with a fixed point (displacement jet of order 3)."""
    if jet.order < 3:
        raise ValueError("a cubic jet is required")
    M = jet.linear
    lam_all = np.linalg.eigvals(M)
    kind, _ = classify_multipliers(lam_all, tol_hyp)
    if kind != ELLIPTIC:
        raise ClassificationError(f"point is {kind}, not elliptic")
    P, lam = symplectic_frame(M)
    flags = tuple(bool(abs(lam**j - 1) < tol_res) for j in range(1, 5))
    if any(flags):
        j = flags.index(True) + 1
        raise ResonanceError(f"resonant multiplier: lambda^{j} = 1 within {tol_res}")
    lam = lam / abs(lam)
    g = _real_to_complex(_conjugate_jet(jet, P))
    g = _eliminate(g, lam, 2)
    c21 = g[2, 1]
    a1 = float((c21 / lam).imag / (2 * np.pi))
    g = _eliminate(g, lam, 3)
    mask = (_TOTAL >= 2) & ~((_J == 2) & (_K == 1))
    remainder = float(np.max(np.abs(g[mask])))
    return NormalFormData(
        lambda_p=complex(lam),
        a1=a1,
        resonance_flags=flags,
        frame=P,
        remainder_norm=remainder,
        period=period,
        point=None if point is None else np.asarray(point, float),
    )


def birkhoff_a1(f, p, k=1, tol_res=TOL_RES, tol_hyp=TOL_HYP):
    """First Birkhoff coefficient of ``f^k`` at the elliptic point ``p``.

    With ``lambda`` the multiplier in an oriented area-one frame, the
    normalized germ is ``lambda z exp(2 pi i a1 |z|^2) + O(|z|^4)``.
    """
    jet = f.iterate_jet(np.asarray(p, float), k, order=3)
    return normal_form_from_jet(jet, tol_res, tol_hyp, period=k, point=p)


def moser_stable_flag(nf: NormalFormData, tol_a1=1e-6):
    """True certifies Moser stability; False means undetermined, never unstable."""
    return bool(abs(nf.a1) > tol_a1)


# -- independent oracle -----------------------------------------------------

@dataclass
class RotationFit:
    slope: float
    intercept: float
    radii_sq: np.ndarray
    rotation: np.ndarray
    dropped: list

    def __float__(self):
        return self.slope


def _orbit_in_frame(f, p, P, k, start, n):
    """Frame coordinates of ``n`` returns of the ``f^k`` orbit from frame point ``start``."""
    p = np.asarray(p, float)
    X = (p + P @ start)[None]
    out = np.empty((n + 1, 2))
    out[0] = start
    Pinv = np.linalg.inv(P)
    for i in range(1, n + 1):
        for _ in range(k):
            X = f.lift(X)
        d = f.wrap_difference(X[0] - p) if hasattr(f, "wrap_difference") else X[0] - p
        out[i] = Pinv @ d
    return out


def rotation_number_fit(f, p, radii, iterations=2000, k=1, degree=2, frame=None):
    """Slope of rotation number against squared radius, measured by iteration.

    Each starting radius is iterated in the oriented linear frame; the rotation
    number is the mean unwrapped angle advance per return, and the squared
    radius is the enclosed area of the orbit over ``pi`` (an invariant that does
    not depend on the nonlinear coordinate change).  A polynomial in ``R^2`` of
    the given degree is fitted; its linear coefficient is returned as ``slope``.
    Orbits whose radius spread exceeds 20% of the mean are dropped.
    """
    p = np.asarray(p, float)
    if frame is None:
        jet = f.iterate_jet(p, k, order=1)
        frame, _ = symplectic_frame(jet.linear)
    P = frame
    rs, nus, dropped = [], [], []
    for r in radii:
        pts = _orbit_in_frame(f, p, P, k, np.array([r, 0.0]), iterations)
        rad = np.hypot(pts[:, 0], pts[:, 1])
        if not np.all(np.isfinite(rad)) or rad.std() > 0.2 * rad.mean():
            dropped.append(float(r))
            continue
        ang = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
        nu = (ang[-1] - ang[0]) / (2 * np.pi * iterations)
        order = np.argsort(np.arctan2(pts[:, 1], pts[:, 0]))
        q = pts[order]
        area = 0.5 * abs(np.dot(q[:, 0], np.roll(q[:, 1], -1)) - np.dot(q[:, 1], np.roll(q[:, 0], -1)))
        rs.append(area / np.pi)
        nus.append(nu)
    if len(rs) < max(3, degree + 1):
        raise InsufficientDataError(f"only {len(rs)} usable radii (dropped {dropped})")
    rs, nus = np.array(rs), np.array(nus)
    coeffs = np.polynomial.polynomial.polyfit(rs, nus, degree)
    return RotationFit(float(coeffs[1]), float(coeffs[0]), rs, nus, dropped)
