"""One-dimensional stable and unstable branches, crossings and recurrence.

A branch is grown from a fundamental interval ``I = [x0, g x0]`` next to a
hyperbolic point.  Every vertex carries a parameter ``t = n + s``: it is the
``n``-th image of ``x0 + s (g x0 - x0)``.  New vertices are inserted by
re-iterating a midpoint parameter, so refinement never interpolates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import WrongClassError
from .maps import InverseMap
from .periodic import HYPERBOLIC, PeriodicOrbit, lift_iterate

log = logging.getLogger(__name__)

STABLE, UNSTABLE = "stable", "unstable"
MIN_SPACING = 1e-13
BLOCK = 200_000


@dataclass
class GrowthParams:
    delta: float
    max_gap: float
    max_angle: float
    budget: float
    max_points: int
    eigenvalue: float
    power: int


@dataclass
class ManifoldBranch:
    owner: PeriodicOrbit
    stability: str
    side: int
    points: np.ndarray
    arclength: np.ndarray
    params: np.ndarray
    fundamental_marks: np.ndarray
    growth_params: GrowthParams
    period: np.ndarray
    termination: str = "budget"
    warnings: list = field(default_factory=list)

    @property
    def length(self):
        return float(self.arclength[-1])

    def reduced(self, pts=None):
        pts = self.points if pts is None else pts
        per = self.period
        out = np.array(pts, float)
        fin = np.isfinite(per)
        out[..., fin] = np.mod(out[..., fin], per[fin])
        return out

    def segment(self, n):
        """Vertices of fundamental segment ``n`` (the ``n``-th image of ``I``)."""
        marks = self.fundamental_marks
        return self.points[marks[n]: marks[n + 1] + 1]

    @property
    def n_segments(self):
        return len(self.fundamental_marks) - 1

    def truncated(self, budget):
        """Copy cut at the first vertex whose arclength reaches ``budget``."""
        end = int(np.searchsorted(self.arclength, budget)) + 1
        end = min(max(end, 2), len(self.points))
        marks = self.fundamental_marks[self.fundamental_marks < end - 1]
        marks = np.append(marks, end - 1)
        return ManifoldBranch(
            self.owner, self.stability, self.side, self.points[:end], self.arclength[:end],
            self.params[:end], marks, self.growth_params, self.period, self.termination, list(self.warnings),
        )


@dataclass
class CrossingRecord:
    point: np.ndarray
    angle: float
    sign: int
    arclengths: tuple

    def to_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "angle": float(self.angle),
            "sign": int(self.sign),
            "arclengths": [float(v) for v in self.arclengths],
        }


# -- return map -------------------------------------------------------------

class _ReturnMap:
    """``G = F^k - m`` on lift coordinates, fixing the chosen lift of ``p``."""

    def __init__(self, f, p, k, power):
        self.f, self.k, self.power = f, k, power
        self.p = np.asarray(p, float)
        Y, _ = lift_iterate(f, self.p, k)
        per = np.asarray(f.period, float)
        fin = np.isfinite(per)
        self.m = np.zeros(2)
        self.m[fin] = np.round((Y[0] - self.p)[fin] / per[fin]) * per[fin]

    def once(self, X):
        for _ in range(self.k):
            X = self.f.lift(X)
        return X - self.m

    def __call__(self, X, times=1):
        for _ in range(times * self.power):
            X = self.once(X)
        return X


def _unstable_direction(f, p, k):
    _, M = lift_iterate(f, p, k)
    w, V = np.linalg.eig(M[0])
    i = int(np.argmax(np.abs(w)))
    lam = w[i].real
    v = V[:, i].real
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return lam, v


def choose_delta(G, p, v, mu, start=1e-3, tol=1e-8, floor=1e-12):
    """Largest ``start / 2^j`` where ``G(p + d v)`` is within ``tol`` of ``p + d mu v``."""
    d = start
    while d > floor:
        err = np.linalg.norm(G(p + d * v) - (p + d * mu * v))
        if err < tol:
            return d
        d /= 2
    return d


def _turn_angles(pts):
    d = np.diff(pts, axis=0)
    a, b = d[:-1], d[1:]
    cr = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dt = np.einsum("ij,ij->i", a, b)
    return np.abs(np.arctan2(cr, dt))


def grow_branch(
    f,
    orbit: PeriodicOrbit,
    stability=UNSTABLE,
    side=+1,
    budget=10.0,
    max_gap=0.01,
    max_angle=0.3,
    max_points=4_000_000,
    n_initial=16,
    max_levels=200,
    delta=None,
):
    """Grow one branch of ``W^u`` or ``W^s`` of ``orbit`` up to arclength ``budget``.

    The stable branch is the unstable branch of the inverse map.  A negative
    eigenvalue is handled by growing with the second iterate so the branch
    stays on the chosen side.
    """
    if orbit.kind != HYPERBOLIC:
        raise WrongClassError(f"manifolds need a hyperbolic orbit, got {orbit.kind}")
    if stability not in (STABLE, UNSTABLE):
        raise ValueError("stability must be 'stable' or 'unstable'")
    g = f if stability == UNSTABLE else InverseMap(f)
    p = np.asarray(orbit.points[0], float)
    k = orbit.period
    lam, v = _unstable_direction(g, p, k)
    power = 2 if lam < 0 else 1
    mu = lam**power
    v = side * v
    G = _ReturnMap(g, p, k, power)
    if delta is None:
        delta = choose_delta(G, p, v, mu)
    x0 = p + delta * v
    x1 = G(x0)
    params = GrowthParams(delta, max_gap, max_angle, budget, max_points, float(lam), power)

    def point_at(n, s):
        X = x0 + s[:, None] * (x1 - x0)
        return G(X, n) if n else X

    s_prev = np.linspace(0.0, 1.0, n_initial + 1)
    p_prev = point_at(0, s_prev)
    s_prev, p_prev = _refine(point_at, 0, s_prev, p_prev, max_gap, max_angle, max_points)
    all_t, all_p = [s_prev], [p_prev]
    total = float(np.sum(np.linalg.norm(np.diff(p_prev, axis=0), axis=1)))
    count = len(s_prev)
    termination = "budget"
    warnings = []
    n = 0
    while total < budget:
        n += 1
        if n > max_levels:
            termination = "level-cap"
            break
        pts = G(p_prev)
        s_new, p_new = _refine(point_at, n, s_prev, pts, max_gap, max_angle, max_points - count)
        if len(s_new) == 0:
            termination = "point-cap"
            warnings.append("truncated branch: point cap reached during refinement")
            break
        all_t.append(n + s_new[1:])
        all_p.append(p_new[1:])
        total += float(np.sum(np.linalg.norm(np.diff(p_new, axis=0), axis=1)))
        count += len(s_new) - 1
        s_prev, p_prev = s_new, p_new
        if not np.all(np.isfinite(p_new)):
            termination = "non-finite"
            warnings.append("branch left the domain of definition")
            break
    for w in warnings:
        log.warning(w)
    t = np.concatenate(all_t)
    pts = np.concatenate(all_p)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    marks = np.searchsorted(t, np.arange(0, int(np.floor(t[-1])) + 1), side="left")
    if t[-1] > marks.size - 1 + 1e-15 or marks[-1] != len(t) - 1:
        marks = np.append(marks, len(t) - 1)
    branch = ManifoldBranch(
        owner=orbit, stability=stability, side=side, points=pts, arclength=arc, params=t,
        fundamental_marks=np.unique(marks), growth_params=params, period=np.asarray(f.period, float),
        termination=termination, warnings=warnings,
    )
    if termination == "budget" and branch.length > budget:
        branch = branch.truncated(budget)
    branch._return_map = G
    return branch


def _refine(point_at, n, s, pts, max_gap, max_angle, room):
    """Insert re-iterated midpoints until gap and turn-angle bounds hold."""
    for _ in range(60):
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        bad = gaps > max_gap
        if len(pts) > 2:
            sharp = _turn_angles(pts) > max_angle
            bad[:-1] |= sharp
            bad[1:] |= sharp
        bad &= np.diff(s) > MIN_SPACING
        if not bad.any():
            break
        idx = np.nonzero(bad)[0]
        if len(s) + len(idx) > room:
            return np.empty(0), np.empty((0, 2))
        mid = 0.5 * (s[idx] + s[idx + 1])
        new = point_at(n, mid)
        s = np.insert(s, idx + 1, mid)
        pts = np.insert(pts, idx + 1, new, axis=0)
    return s, pts


def image_consistency(branch: ManifoldBranch, tol_factor=10.0):
    """Max distance from ``g(segment n)`` to segment ``n + 1``; must be below 10 * max_gap."""
    G = getattr(branch, "_return_map", None)
    if G is None:
        raise ValueError("branch was not produced by grow_branch")
    worst = 0.0
    marks = branch.fundamental_marks
    t_end = branch.params[-1]
    for n in range(branch.n_segments - 1):
        seg_t = branch.params[marks[n]: marks[n + 1] + 1]
        # the last segment may be partial: only vertices whose image was grown count
        img = G(branch.segment(n)[seg_t + 1 <= t_end + 1e-12])
        if len(img) == 0:
            continue
        tree = cKDTree(branch.segment(n + 1))
        d, _ = tree.query(img)
        worst = max(worst, float(d.max()))
    return worst, worst <= tol_factor * branch.growth_params.max_gap


# -- crossings ---------------------------------------------------------------

def _segments(branch, mask_radius):
    a = branch.points[:-1]
    b = branch.points[1:]
    keep = branch.arclength[1:] >= mask_radius
    idx = np.nonzero(keep)[0]
    return a[idx], b[idx], idx


def _place(a, b, per):
    """Shift segments into the fundamental domain and add wrapped copies."""
    fin = np.isfinite(per)
    shift = np.zeros_like(a)
    shift[:, fin] = np.floor(a[:, fin] / per[fin]) * per[fin]
    a, b = a - shift, b - shift
    src = np.arange(len(a))
    outs_a, outs_b, outs_i = [a], [b], [src]
    for d in np.nonzero(fin)[0]:
        cur_a = np.concatenate(outs_a)
        cur_b = np.concatenate(outs_b)
        cur_i = np.concatenate(outs_i)
        lo = np.minimum(cur_a[:, d], cur_b[:, d])
        hi = np.maximum(cur_a[:, d], cur_b[:, d])
        for sel, off in ((hi >= per[d], -per[d]), (lo < 0, per[d])):
            e = np.zeros(2)
            e[d] = off
            outs_a.append(cur_a[sel] + e)
            outs_b.append(cur_b[sel] + e)
            outs_i.append(cur_i[sel])
    return np.concatenate(outs_a), np.concatenate(outs_b), np.concatenate(outs_i)


def _cell_keys(mid, h, origin):
    c = np.floor((mid - origin) / h).astype(np.int64)
    return c


def _candidate_pairs(m1, m2, h):
    """Index pairs whose midpoints fall in neighbouring cells of size ``h``."""
    origin = np.minimum(m1.min(axis=0), m2.min(axis=0)) - h
    c1 = _cell_keys(m1, h, origin)
    c2 = _cell_keys(m2, h, origin)
    width = int(max(c1[:, 1].max(), c2[:, 1].max())) + 3
    k2 = c2[:, 0] * width + c2[:, 1]
    order = np.argsort(k2, kind="stable")
    k2s = k2[order]
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            k1 = (c1[:, 0] + dx) * width + (c1[:, 1] + dy)
            lo = np.searchsorted(k2s, k1, "left")
            hi = np.searchsorted(k2s, k1, "right")
            cnt = hi - lo
            if cnt.sum() == 0:
                continue
            for start in range(0, len(k1), BLOCK):
                sl = slice(start, start + BLOCK)
                c = cnt[sl]
                tot = int(c.sum())
                if tot == 0:
                    continue
                i = np.repeat(np.arange(start, start + len(c)), c)
                offs = np.arange(tot) - np.repeat(np.cumsum(c) - c, c)
                j = order[np.repeat(lo[sl], c) + offs]
                yield i, j


def _intersect(a1, b1, a2, b2):
    d1 = b1 - a1
    d2 = b2 - a2
    w = a2 - a1
    den = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * d2[:, 1] - w[:, 1] * d2[:, 0]) / den
        u = (w[:, 0] * d1[:, 1] - w[:, 1] * d1[:, 0]) / den
    scale = np.hypot(d1[:, 0], d1[:, 1]) * np.hypot(d2[:, 0], d2[:, 1])
    hit = (np.abs(den) > 1e-13 * scale) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
    return hit, t, u, den


def segment_crossings(a1, e1, a2, e2, period, exclude_adjacent=False):
    """All crossings between two segment sets on a surface with the given periods.

    Returns arrays ``(i, j, t, u, den)`` with one row per crossing on the
    surface: ``i``, ``j`` index the input segments, ``t``, ``u`` are the
    positions along them and ``den = cross(d1, d2)`` carries the orientation.
    Segments must be shorter than half a period.
    """
    per = np.asarray(period, float)
    empty = (np.empty(0, int), np.empty(0, int), np.empty(0), np.empty(0), np.empty(0))
    if len(a1) == 0 or len(a2) == 0:
        return empty
    A1, E1, S1 = _place(a1, e1, per)
    A2, E2, S2 = _place(a2, e2, per)
    h = max(np.linalg.norm(E1 - A1, axis=1).max(), np.linalg.norm(E2 - A2, axis=1).max(), 1e-9)
    rows = []
    for ci, cj in _candidate_pairs(0.5 * (A1 + E1), 0.5 * (A2 + E2), h):
        si, sj = S1[ci], S2[cj]
        if exclude_adjacent:
            ok = np.abs(si - sj) > 1
            ci, cj, si, sj = ci[ok], cj[ok], si[ok], sj[ok]
        hit, t, u, den = _intersect(A1[ci], E1[ci], A2[cj], E2[cj])
        if hit.any():
            rows.append((si[hit], sj[hit], t[hit], u[hit], den[hit]))
    if not rows:
        return empty
    i, j, t, u, den = (np.concatenate(c) for c in zip(*rows))
    if exclude_adjacent:
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        _, keep = np.unique(np.stack([lo, hi], 1), axis=0, return_index=True)
    else:
        _, keep = np.unique(np.stack([i, j], 1), axis=0, return_index=True)
    keep = np.sort(keep)
    return i[keep], j[keep], t[keep], u[keep], den[keep]


def detect_crossings(b1: ManifoldBranch, b2: ManifoldBranch, min_angle=1e-6, mask=None):
    """Transverse intersections of two branches, sorted by arclength on ``b1``.

    Segments within arclength ``2 delta`` of the owner point are masked, so the
    shared endpoint of two branches of one orbit is not reported.  With
    ``b1 is b2`` adjacent segments are skipped.
    """
    per = np.asarray(b1.period, float)
    same = b1 is b2
    r1 = 2 * b1.growth_params.delta if mask is None else mask
    r2 = 2 * b2.growth_params.delta if mask is None else mask
    a1, e1, i1 = _segments(b1, r1)
    a2, e2, i2 = _segments(b2, r2)
    si, sj, t, u, den = segment_crossings(a1, e1, a2, e2, per, exclude_adjacent=same)
    if len(si) == 0:
        return []
    d1 = e1[si] - a1[si]
    d2 = e2[sj] - a2[sj]
    sin = np.abs(den) / (np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1))
    ang = np.arcsin(np.clip(sin, 0.0, 1.0))
    keep = ang >= min_angle
    si, sj, t, u, den, ang = si[keep], sj[keep], t[keep], u[keep], den[keep], ang[keep]
    gi, gj = i1[si], i2[sj]
    arc1, arc2 = b1.arclength, b2.arclength
    s1 = arc1[gi] + t * (arc1[gi + 1] - arc1[gi])
    s2 = arc2[gj] + u * (arc2[gj + 1] - arc2[gj])
    pts = a1[si] + t[:, None] * d1[keep]
    fin = np.isfinite(per)
    pts[:, fin] = np.mod(pts[:, fin], per[fin])
    order = np.lexsort((s2, s1))
    return [
        CrossingRecord(pts[q].copy(), float(ang[q]), int(np.sign(den[q])), (float(s1[q]), float(s2[q])))
        for q in order
    ]


# -- recurrence and closures -----------------------------------------------

def _densify(points, spacing):
    d = np.diff(points, axis=0)
    L = np.linalg.norm(d, axis=1)
    n = np.maximum(1, np.ceil(L / spacing).astype(int))
    rep = np.repeat(np.arange(len(d)), n)
    frac = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    frac = frac / np.repeat(n, n)
    return np.vstack([points[rep] + frac[:, None] * d[rep], points[-1:]])


def _tree(points, per, lo=None, box=None):
    fin = np.isfinite(per)
    q = np.array(points, float)
    q[:, fin] = np.mod(q[:, fin], per[fin]) % per[fin]
    if fin.all():
        return cKDTree(q, boxsize=per)
    if lo is not None:
        q[:, ~fin] -= lo
        return cKDTree(q, boxsize=np.where(fin, per, box))
    return cKDTree(q)


def _query_points(points, per, lo=None):
    fin = np.isfinite(per)
    q = np.array(points, float)
    q[:, fin] = np.mod(q[:, fin], per[fin]) % per[fin]
    if lo is not None and not fin.all():
        q[:, ~fin] -= lo
    return q


def recurrence_report(branch: ManifoldBranch, probe_radius=0.02, tail_fraction=0.5, hyperbolic_points=None):
    """Classify a grown branch as recurrent, saddle-connection candidate or undetermined.

    Advisory only: a saddle connection can never be certified numerically.
    """
    per = branch.period
    n_tail = max(2, int(len(branch.points) * tail_fraction))
    tail = _densify(branch.points[-n_tail:], probe_radius / 2)
    first = branch.segment(0) if branch.n_segments > 0 else branch.points[:2]
    fin = np.isfinite(per)
    lo = None
    box = None
    if not fin.all():
        both = np.vstack([tail, first])
        lo = both[:, ~fin].min(axis=0)
        box = 2 * (both[:, ~fin].max(axis=0) - lo) + 1.0
    tree = _tree(tail, per, lo, box)
    d, _ = tree.query(_query_points(first, per, lo))
    if np.all(d <= probe_radius):
        return "recurrent"
    if branch.n_segments >= 4:
        diam = [np.ptp(branch.segment(n), axis=0).max() for n in range(branch.n_segments)]
        late = diam[-3:]
        end = branch.points[-1]
        if late[-1] < probe_radius and late[0] >= late[-1] and hyperbolic_points is not None:
            for q in np.atleast_2d(hyperbolic_points):
                dd = np.array(end - q, float)
                dd[fin] -= per[fin] * np.round(dd[fin] / per[fin])
                if np.linalg.norm(dd) < probe_radius:
                    return "saddle-connection-candidate"
    return "undetermined"


def rasterize(points, mesh, per):
    """Centres of mesh cells visited by the (densified) polyline."""
    dense = _densify(np.asarray(points, float), mesh / 2)
    fin = np.isfinite(per)
    q = dense.copy()
    q[:, fin] = np.mod(q[:, fin], per[fin])
    cells = np.unique(np.floor(q / mesh).astype(np.int64), axis=0)
    return (cells + 0.5) * mesh


def hausdorff(A, B, per):
    fin = np.isfinite(per)
    lo, box = None, None
    if not fin.all():
        both = np.vstack([A, B])
        lo = both[:, ~fin].min(axis=0)
        box = 2 * (both[:, ~fin].max(axis=0) - lo) + 1.0
    ta, tb = _tree(A, per, lo, box), _tree(B, per, lo, box)
    dab = tb.query(_query_points(A, per, lo))[0].max()
    dba = ta.query(_query_points(B, per, lo))[0].max()
    return float(max(dab, dba))


def closure_compare(branches, mesh=0.02):
    """Symmetric matrix of Hausdorff distances between rasterized branch closures."""
    per = np.asarray(branches[0].period, float)
    cells = [rasterize(b.points, mesh, per) for b in branches]
    n = len(branches)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = hausdorff(cells[i], cells[j], per)
    return out


def branch_csv_rows(branch: ManifoldBranch):
    return [(float(s), float(x), float(y)) for s, (x, y) in zip(branch.arclength, branch.points)]
