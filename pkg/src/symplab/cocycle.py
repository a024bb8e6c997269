"""Finite-time rates of partially hyperbolic products and cone-field checks.

For ``(x, s) -> (A x, phi_x(s))`` the fiber plane is invariant, so the center
cocycle is the product of fiber Jacobian blocks and the stable rate is read
off the quotient by the fiber, which is the base matrix ``A`` itself.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, PreconditionError

log = logging.getLogger(__name__)

GRAZING = 1e-6


@dataclass
class SplittingFrame:
    """Per-point bases: columns of ``stable`` (4,), ``unstable`` (4,), ``center`` (4, 2)."""

    points: np.ndarray
    stable: np.ndarray
    unstable: np.ndarray
    center: np.ndarray

    def basis(self, i):
        return np.column_stack([self.stable[i], self.unstable[i], self.center[i]])


@dataclass
class RateEstimate:
    n: int
    nu_n: np.ndarray
    gamma_n: np.ndarray
    gamma_n_inv_bound: np.ndarray
    nu1: np.ndarray
    gamma1: np.ndarray
    gamma1_inv: np.ndarray
    log_det: np.ndarray
    log_envelope: float
    naive_overflow: bool
    window_starts: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    # logs are authoritative: long chaotic windows under- or overflow the exponentials
    log_nu_n: np.ndarray = None
    log_gamma_n: np.ndarray = None
    log_gamma_n_inv: np.ndarray = None

    def __post_init__(self):
        with np.errstate(divide="ignore"):
            if self.log_nu_n is None:
                self.log_nu_n = np.log(self.nu_n)
            if self.log_gamma_n is None:
                self.log_gamma_n = np.log(self.gamma_n)
            if self.log_gamma_n_inv is None:
                self.log_gamma_n_inv = np.log(self.gamma_n_inv_bound)

    @property
    def symmetry_defect(self):
        """``max |log(gamma_n * gamma_n_inv_bound)|``; zero for area-preserving fibers."""
        return float(np.max(np.abs(self.log_gamma_n + self.log_gamma_n_inv)))

    def csv_rows(self, orbit_id=0, r=2.0):
        margin = window_margins(self, r)
        return [
            (orbit_id, self.n, float(lnu / self.n), float(lg / self.n), float(m))
            for lnu, lg, m in zip(self.log_nu_n, self.log_gamma_n, margin)
        ]


def _base_eigen(A):
    w, V = np.linalg.eig(np.asarray(A, float))
    order = np.argsort(np.abs(w))
    w, V = w[order].real, V[:, order].real
    V = V / np.linalg.norm(V, axis=0)
    return w, V


def orbit_sample(system, x0, length):
    """``length`` consecutive points of the orbit of ``x0``."""
    x = np.atleast_2d(np.asarray(x0, float))
    out = np.empty((length, x.shape[1]))
    for i in range(length):
        out[i] = x[0]
        x = system(x)
    return out


def _fiber_blocks(system, orbit):
    J = system.jacobian(orbit)
    return J, J[:, 2:, 2:]


def splitting_frame(system, orbit, transient=40):
    """Candidate splitting along ``orbit``.

    Direct products get the exact frame (base eigendirections, fiber plane).
    Skew products keep the invariant fiber plane and obtain the stable and
    unstable lines by pushing the base eigendirections along the orbit.
    """
    orbit = np.asarray(orbit, float)
    m = len(orbit)
    _, V = _base_eigen(system.base.A)
    es = np.concatenate([V[:, 0], [0.0, 0.0]])
    eu = np.concatenate([V[:, 1], [0.0, 0.0]])
    center = np.zeros((m, 4, 2))
    center[:, 2, 0] = center[:, 3, 1] = 1.0
    if getattr(system, "is_direct", False):
        return SplittingFrame(orbit, np.tile(es, (m, 1)), np.tile(eu, (m, 1)), center)
    J = system.jacobian(orbit)
    U = np.empty((m, 4))
    v = eu.copy()
    for _ in range(transient):
        v = J[0] @ v
        v /= np.linalg.norm(v)
    # the first few vectors are a transient; the push-forward converges geometrically
    for i in range(m):
        U[i] = v
        v = J[i] @ v
        v /= np.linalg.norm(v)
    S = np.empty((m, 4))
    v = es.copy()
    inv = np.linalg.inv(J)
    for i in range(m - 1, -1, -1):
        S[i] = v
        if i > 0:
            v = inv[i - 1] @ v
            v /= np.linalg.norm(v)
    return SplittingFrame(orbit, S, U, center)


def _accumulate(blocks):
    """Singular values of a product of 2x2 blocks without overflow (log scale)."""
    M = np.eye(2)
    log_scale = 0.0
    for B in blocks:
        M = B @ M
        s = np.abs(M).max()
        M = M / s
        log_scale += np.log(s)
    log_smax = np.log(np.linalg.svd(M, compute_uv=False)[0]) + log_scale
    log_det = float(np.sum(np.log(np.abs(np.linalg.det(blocks)))))
    return log_smax, log_det - log_smax, log_det


def _naive_overflows(blocks):
    with np.errstate(over="ignore", invalid="ignore"):
        M = np.eye(2)
        for B in blocks:
            M = B @ M
        return not np.all(np.isfinite(M))


def finite_time_rates(system, orbit, n):
    """Window rates over consecutive non-overlapping windows of length ``n``.

    ``nu_n`` is the stable contraction (quotient by the center), ``gamma_n`` the
    minimal and ``gamma_n_inv_bound`` the maximal center expansion, both from
    singular values of the accumulated fiber product.
    """
    orbit = np.asarray(orbit, float)
    if n < 1:
        raise PreconditionError("window length must be >= 1")
    if len(orbit) < n:
        raise InsufficientDataError(f"orbit of length {len(orbit)} is shorter than the window {n}")
    J, blocks = _fiber_blocks(system, orbit)
    dets = np.linalg.det(blocks)
    if np.max(np.abs(np.abs(dets) - 1)) > 1e-6:
        raise PreconditionError("fiber maps must be area-preserving (|det| = 1)")
    w, _ = _base_eigen(system.base.A)
    lam_s = abs(w[0])
    sv = np.linalg.svd(blocks, compute_uv=False)
    gamma1, gamma1_inv = sv[:, 1], sv[:, 0]
    nu1 = np.full(len(orbit), lam_s)
    starts = np.arange(0, len(orbit) - n + 1, n)
    lg_n, lg_inv, ldet = [], [], []
    overflow = False
    for s0 in starts:
        win = blocks[s0: s0 + n]
        lmax, lmin, ld = _accumulate(win)
        lg_n.append(lmin)
        lg_inv.append(lmax)
        ldet.append(ld)
        overflow |= _naive_overflows(win) if n > 50 else False
    lg_n, lg_inv = np.array(lg_n), np.array(lg_inv)
    lnu = np.full(len(starts), n * np.log(lam_s))
    with np.errstate(over="ignore", under="ignore"):
        nu_n, g_n, g_inv = np.exp(lnu), np.exp(lg_n), np.exp(lg_inv)
    # distance between the window rate and the product of one-step rates
    log_g1 = np.array([np.sum(np.log(gamma1[s: s + n])) for s in starts])
    log_envelope = float(np.max(np.abs(lg_n - log_g1)))
    if overflow:
        log.info("naive Jacobian product overflowed; log-scaled accumulation used")
    return RateEstimate(n, nu_n, g_n, g_inv, nu1, gamma1, gamma1_inv, np.array(ldet), log_envelope, overflow, starts,
                        lnu, lg_n, lg_inv)


def window_margins(rates: RateEstimate, r):
    """Per-window ``(r log gamma_n - log nu_n) / n``."""
    return (r * rates.log_gamma_n - rates.log_nu_n) / rates.n


def check_r_normal(rates: RateEstimate, r):
    """``nu_n < gamma_n^r`` on every window; margin is per step, minimised over windows."""
    margin = float(np.min(window_margins(rates, r)))
    return margin > 0, margin


# -- cones -----------------------------------------------------------------

def _cone_form(angle, axis_first):
    """Quadratic form non-negative exactly on the cone of ``angle`` around a subspace."""
    c2, s2 = np.cos(angle) ** 2, np.sin(angle) ** 2
    if axis_first:  # cone around the first coordinate (stable line)
        return np.diag([s2, -c2, -c2, -c2])
    return np.diag([-c2, s2, s2, s2])


def _slemma_margin(L, K, iters=50):
    """``max_{mu >= 0} lambda_min(L^T K L - mu K)`` per matrix, by golden section."""
    LKL = np.einsum("nji,jk,nkl->nil", L, K, L)
    scale = np.linalg.norm(L, axis=(1, 2)) ** 2
    lo = np.zeros(len(L))
    hi = 4 * scale + 1
    g = (np.sqrt(5) - 1) / 2

    def m(mu):
        return np.linalg.eigvalsh(LKL - mu[:, None, None] * K)[:, 0]

    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = m(c), m(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - g * (b - a)
        d_new = a + g * (b - a)
        c, d = c_new, d_new
        fc, fd = m(c), m(d)
    best = np.maximum(np.maximum(fc, fd), m(np.zeros(len(L))))
    return best / scale


@dataclass
class ConeReport:
    result: bool | None
    margin_cu: float
    margin_s: float
    angle: float

    @property
    def indeterminate(self):
        return self.result is None


def cone_dominated_check(system, orbit, cone_angle):
    """Strict invariance of the center-unstable cone (forward) and the stable cone (backward).

    Returns ``True``/``False``, or ``None`` (indeterminate) when the best
    invariance margin is within ``1e-6`` of zero.
    """
    if not 0 < cone_angle < np.pi / 2:
        raise PreconditionError("cone_angle must lie in (0, pi/2)")
    orbit = np.asarray(orbit, float)
    _, V = _base_eigen(system.base.A)
    B = np.zeros((4, 4))
    B[:2, 0], B[:2, 1] = V[:, 0], V[:, 1]
    B[2, 2] = B[3, 3] = 1.0
    B_inv = np.linalg.inv(B)
    J = system.jacobian(orbit)
    L = B_inv @ J @ B
    m_cu = float(np.min(_slemma_margin(L, _cone_form(cone_angle, axis_first=False))))
    m_s = float(np.min(_slemma_margin(np.linalg.inv(L), _cone_form(cone_angle, axis_first=True))))
    worst = min(m_cu, m_s)
    result = None if abs(worst) < GRAZING else bool(worst > 0)
    return ConeReport(result, m_cu, m_s, float(cone_angle))
