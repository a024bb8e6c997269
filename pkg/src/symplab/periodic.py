"""Periodic-point search, classification and the N-elementary test."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

TOL_HYP = 1e-6
TOL_RES = 1e-8
N_MAX = 16
DEDUP_RADIUS = 1e-6

HYPERBOLIC, ELLIPTIC, PARABOLIC = "hyperbolic", "elliptic", "parabolic"


@dataclass
class PeriodicOrbit:
    points: np.ndarray
    period: int
    multipliers: np.ndarray
    kind: str
    elementary_up_to: int
    residual: float
    deck: tuple = ()
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def point(self):
        return self.points[0]

    def to_dict(self):
        return {
            "points": [[float(v) for v in p] for p in self.points],
            "minimal_period": int(self.period),
            "multipliers": [[float(m.real), float(m.imag)] for m in self.multipliers],
            "class": self.kind,
            "elementary_up_to": int(self.elementary_up_to),
            "residual": float(self.residual),
            "deck": [int(v) for v in self.deck],
            "degenerate": bool(self.degenerate),
            "warnings": list(self.warnings),
        }


def _period(f):
    return np.asarray(f.period, dtype=float)


def _lift(f, X):
    return f.lift(X)


def lift_iterate(f, X, n):
    """``F^n`` on lift coordinates and its Jacobian, vectorised over rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    M = np.broadcast_to(np.eye(d), (len(X), d, d)).copy()
    Y = X
    for _ in range(n):
        M = f.jacobian(Y) @ M
        Y = _lift(f, Y)
    return Y, M


def orbit_jacobian(f, x, k):
    _, M = lift_iterate(f, x, k)
    return M[0]


def _wrap(f, d):
    per = _period(f)
    d = np.array(d, dtype=float)
    fin = np.isfinite(per)
    d[..., fin] -= per[fin] * np.round(d[..., fin] / per[fin])
    return d


def _reduce(f, X):
    return f.reduce(X)


def _tree(f, P):
    per = _period(f)
    P = np.asarray(P, dtype=float)
    fin = np.isfinite(per)
    if fin.all():
        return cKDTree(np.mod(P, per) % per, boxsize=per)
    if not fin.any():
        return cKDTree(P)
    shifted = P.copy()
    box = per.copy()
    lo = P[:, ~fin].min(axis=0)
    span = P[:, ~fin].max(axis=0) - lo
    shifted[:, ~fin] = P[:, ~fin] - lo
    box[~fin] = 2 * span + 1.0
    shifted[:, fin] = np.mod(shifted[:, fin], per[fin]) % per[fin]
    return cKDTree(shifted, boxsize=box)


def classify_multipliers(multipliers, tol_hyp=TOL_HYP):
    """Hyperbolic / parabolic / elliptic trichotomy plus warnings."""
    lam = np.asarray(multipliers, dtype=complex)
    mods = np.abs(lam)
    warnings = []
    if np.all(np.abs(mods - 1) > tol_hyp):
        return HYPERBOLIC, warnings
    neutral = lam[np.abs(mods - 1) <= tol_hyp]
    if np.any(np.abs(neutral - 1) < tol_hyp) or np.any(np.abs(neutral + 1) < tol_hyp):
        return PARABOLIC, warnings
    if np.any(np.abs(neutral.imag) < tol_hyp):
        warnings.append("near-parabolic: real multiplier within tol_hyp of the unit circle")
    return ELLIPTIC, warnings


def classify(orbit: PeriodicOrbit, tol_hyp=TOL_HYP):
    """Recompute the class of ``orbit``; returns ``(kind, multipliers)``."""
    kind, warnings = classify_multipliers(orbit.multipliers, tol_hyp)
    if orbit.degenerate:
        kind = PARABOLIC
    orbit.kind = kind
    orbit.warnings = sorted(set(orbit.warnings) | set(warnings))
    return kind, orbit.multipliers


def is_elementary(orbit_or_multipliers, n_max=N_MAX, tol_res=TOL_RES):
    """Largest ``N <= n_max`` with ``|lambda^j - 1| >= tol_res`` for all ``j <= N``."""
    lam = getattr(orbit_or_multipliers, "multipliers", orbit_or_multipliers)
    lam = np.asarray(lam, dtype=complex)
    power = np.ones_like(lam)
    for j in range(1, n_max + 1):
        power = power * lam
        if np.any(np.abs(power - 1) < tol_res):
            return j - 1
    return n_max


def _seed_grid(f, resolution, box=None):
    d = len(_period(f))
    per = _period(f)
    axes = []
    for k in range(d):
        if np.isfinite(per[k]):
            axes.append((np.arange(resolution) + 0.5) / resolution * per[k])
        else:
            lo, hi = box if box is not None else getattr(f, "sample_box", (-1.0, 1.0))
            axes.append(np.linspace(lo, hi, resolution))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _newton(f, X, m, n, tol, max_iter):
    """Damped Newton on ``F^n(X) - X - m``; returns points, residuals, cond."""
    d = X.shape[1]
    eye = np.eye(d)
    Y, M = lift_iterate(f, X, n)
    R = Y - X - m
    res = np.linalg.norm(R, axis=1)
    active = np.ones(len(X), bool)
    for _ in range(max_iter):
        active &= res > 1e-3 * tol
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        G = M[idx] - eye
        try:
            step = -np.linalg.solve(G, R[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.einsum("nij,nj->ni", np.linalg.pinv(G), R[idx])
        lam = np.ones(len(idx))
        improved = np.zeros(len(idx), bool)
        for _ in range(8):
            trial = X[idx] + lam[:, None] * step
            Yt, Mt = lift_iterate(f, trial, n)
            Rt = Yt - trial - m[idx]
            rt = np.linalg.norm(Rt, axis=1)
            ok = (rt < res[idx]) & ~improved
            sel = idx[ok]
            X[sel], M[sel], R[sel], res[sel] = trial[ok], Mt[ok], Rt[ok], rt[ok]
            improved |= ok
            if improved.all():
                break
            lam = np.where(improved, lam, lam / 2)
        stalled = idx[~improved]
        active[stalled] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(M - eye)
    return X, res, cond


def _maximal_divisors(n):
    """Proper divisors ``n / q`` for the primes ``q | n``."""
    out, m, q = [], n, 2
    while q * q <= m:
        if m % q == 0:
            out.append(n // q)
            while m % q == 0:
                m //= q
        q += 1
    if m > 1:
        out.append(n // m)
    return sorted(set(out))


def find_periodic_points(
    f,
    n,
    seed_grid=32,
    tol=1e-10,
    m_max=0,
    max_iter=40,
    tol_hyp=TOL_HYP,
    tol_res=TOL_RES,
    n_max=N_MAX,
    seeds=None,
    box=None,
):
    """Points of ``P_n(f)`` found by damped Newton from a uniform seed grid.

    On periodic coordinates the deck class ``m`` of each seed is the rounded
    lift displacement ``F^n(X0) - X0``, widened by offsets ``|dm| <= m_max``.
    Returns deduplicated orbits (one entry per orbit), sorted deterministically.
    Seeds that fail to converge are skipped.
    """
    if n < 1:
        raise ValueError("period n must be >= 1")
    per = _period(f)
    fin = np.isfinite(per)
    X0 = _seed_grid(f, seed_grid, box) if seeds is None else np.atleast_2d(np.asarray(seeds, float))
    if seeds is None and n > 1:
        # basins shrink with n; points of period d | n are reused as exact seeds
        sub = [
            o.points
            for d in _maximal_divisors(n)
            for o in find_periodic_points(f, d, seed_grid, tol, m_max, max_iter, tol_hyp, tol_res, n_max, box=box)
        ]
        if sub:
            X0 = np.vstack([X0] + sub)
    Y0, _ = lift_iterate(f, X0, n)
    base_m = np.zeros_like(X0)
    base_m[:, fin] = np.round((Y0 - X0)[:, fin] / per[fin]) * per[fin]
    offsets = [np.zeros(X0.shape[1])]
    if m_max > 0:
        ranges = [np.arange(-m_max, m_max + 1) if fin[k] else np.array([0]) for k in range(X0.shape[1])]
        grid = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, X0.shape[1])
        offsets = [o * np.where(fin, per, 0) for o in grid]
    Xs, ms = [], []
    for off in offsets:
        Xs.append(X0.copy())
        ms.append(base_m + off)
    X = np.concatenate(Xs)
    m = np.concatenate(ms)
    X, res, cond = _newton(f, X, m, n, tol, max_iter)
    good = res < tol
    if not good.any():
        return []
    roots = _reduce(f, X[good])
    conds = cond[good]
    # collapse exact repeats first so clustering stays cheap when many seeds agree
    _, keep = np.unique(np.round(_tree_coords(f, roots, roots) / DEDUP_RADIUS), axis=0, return_index=True)
    roots, conds = roots[keep], conds[keep]
    # deterministic merge: sort, then cluster within the dedup radius
    order = np.lexsort(np.round(roots, 9).T[::-1])
    roots, conds = roots[order], conds[order]
    tree = _tree(f, roots)
    pairs = tree.query_pairs(DEDUP_RADIUS, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(roots),) * 2) if len(pairs) else coo_matrix((len(roots), len(roots)))
    _, labels = connected_components(graph, directed=False)
    _, first = np.unique(labels, return_index=True)
    uniq = roots[np.sort(first)]
    uconds = conds[np.sort(first)]
    uniq_tree = _tree(f, uniq)

    orbits = []
    assigned = np.zeros(len(uniq), bool)
    for i, x in enumerate(uniq):
        if assigned[i]:
            continue
        orbit = _build_orbit(f, x, n, tol, tol_hyp, tol_res, n_max, degenerate=uconds[i] > 1e12)
        for p in orbit.points:
            for j in uniq_tree.query_ball_point(_tree_coords(f, p, uniq), 1e3 * DEDUP_RADIUS):
                assigned[j] = True
        assigned[i] = True
        orbits.append(orbit)
    orbits.sort(key=lambda o: tuple(np.round(o.points.min(axis=0), 9)) + tuple(np.round(o.points[0], 9)))
    return orbits


def _tree_coords(f, p, reference):
    per = _period(f)
    fin = np.isfinite(per)
    q = np.array(p, dtype=float)
    if fin.all():
        return np.mod(q, per) % per
    if fin.any():
        lo = np.asarray(reference)[:, ~fin].min(axis=0)
        q[..., ~fin] = q[..., ~fin] - lo
        q[..., fin] = np.mod(q[..., fin], per[fin]) % per[fin]
    return q


def _polish(f, x, k, tol):
    """A few undamped Newton steps on the minimal period to tighten the residual."""
    x = np.asarray(x, float)
    per = _period(f)
    fin = np.isfinite(per)
    eye = np.eye(len(x))
    for _ in range(4):
        Y, M = lift_iterate(f, x, k)
        d = (Y - x)[0]
        mvec = np.zeros_like(d)
        mvec[fin] = np.round(d[fin] / per[fin]) * per[fin]
        r = d - mvec
        if np.linalg.norm(r) < 1e-3 * tol:
            break
        try:
            x = x - np.linalg.solve(M[0] - eye, r)
        except np.linalg.LinAlgError:
            break
    return _reduce(f, x)


def _build_orbit(f, x, n, tol, tol_hyp, tol_res, n_max, degenerate=False):
    per = _period(f)
    fin = np.isfinite(per)
    k = n
    for j in range(1, n + 1):
        if n % j:
            continue
        y = _reduce(f, lift_iterate(f, x, j)[0][0])
        if np.linalg.norm(_wrap(f, y - x)) < max(1e3 * tol, 1e-8):
            k = j
            break
    if not degenerate:
        x = _polish(f, x, k, tol)
    pts = [np.asarray(x, float)]
    for _ in range(k - 1):
        pts.append(_reduce(f, _lift(f, pts[-1][None])[0]))
    Y, M = lift_iterate(f, x, k)
    disp = (Y - x)[0]
    deck = np.zeros_like(disp)
    deck[fin] = np.round(disp[fin] / per[fin])
    residual = float(np.linalg.norm(_wrap(f, disp)))
    lam = np.linalg.eigvals(M[0])
    lam = lam[np.lexsort((lam.imag, np.abs(lam)))]
    kind, warnings = classify_multipliers(lam, tol_hyp)
    if degenerate:
        kind = PARABOLIC
        warnings.append("degenerate: F^n - id has a singular Jacobian")
    orbit = PeriodicOrbit(
        points=np.array(pts),
        period=k,
        multipliers=lam,
        kind=kind,
        elementary_up_to=is_elementary(lam, n_max, tol_res),
        residual=residual,
        deck=tuple(int(v) for v in deck),
        degenerate=degenerate,
        warnings=warnings,
    )
    return orbit


def orbit_at(f, x, k=1, tol=1e-10, tol_hyp=TOL_HYP, tol_res=TOL_RES, n_max=N_MAX):
    """Refine a known approximate periodic point and wrap it as a :class:`PeriodicOrbit`."""
    x = _polish(f, np.asarray(x, float), k, tol)
    return _build_orbit(f, x, k, tol, tol_hyp, tol_res, n_max)


def count_points(orbits):
    return int(sum(o.period for o in orbits))
