"""Closing gates, closed curves, homology classes and intersection numbers.

Near a hyperbolic point ``p`` a straightened chart sends the local unstable
manifold to the x-axis and the local stable manifold to the y-axis.  A gate
is a thin region in the open first quadrant of that chart; the first time a
branch enters a gate, a straight chart segment back to the corner closes the
branch arc into a curve on the surface.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, IntegrityError, LiftInconsistencyError, NonTransverseError, NotFoundError, PreconditionError
from .manifolds import STABLE, UNSTABLE, ManifoldBranch, _unstable_direction, grow_branch, segment_crossings
from .maps import SPHERE, TORUS, InverseMap

log = logging.getLogger(__name__)

SPHERE_EPS = 1e-2
TORUS_EPS = 5e-2
TANGENT_ANGLE = 1e-6
MAX_PIECE = 0.25
PUSH_OFF = 1e-7 * np.array([0.7548776662, 0.5698402910])
BLOCK = 100_000


# -- chart -----------------------------------------------------------------

@dataclass
class StraightChart:
    """``x = u - phi_s(s)``, ``y = s - phi_u(u)`` in the linear frame ``(u, s)``.

    ``phi_u`` is the local unstable graph ``s = phi_u(u)`` and ``phi_s`` the
    local stable graph ``u = phi_s(s)``, tabulated on ``|.| <= rho``.
    """

    p: np.ndarray
    frame: np.ndarray
    rho: float
    u_grid: np.ndarray
    s_on_u: np.ndarray
    s_grid: np.ndarray
    u_on_s: np.ndarray

    def __post_init__(self):
        self.frame_inv = np.linalg.inv(self.frame)

    def _phi_u(self, u):
        return np.interp(u, self.u_grid, self.s_on_u)

    def _phi_s(self, s):
        return np.interp(s, self.s_grid, self.u_on_s)

    def to_chart(self, X, site=None):
        d = np.atleast_2d(np.asarray(X, float)) - self.p
        if site is not None:
            d = d - site
        w = d @ self.frame_inv.T
        u, s = w[:, 0], w[:, 1]
        return np.column_stack([u - self._phi_s(s), s - self._phi_u(u)])

    def from_chart(self, C, site=None):
        C = np.atleast_2d(np.asarray(C, float))
        u, s = C[:, 0].copy(), C[:, 1].copy()
        for _ in range(100):
            u_new = C[:, 0] + self._phi_s(s)
            s_new = C[:, 1] + self._phi_u(u_new)
            done = np.max(np.abs(u_new - u)) + np.max(np.abs(s_new - s)) < 1e-15
            u, s = u_new, s_new
            if done:
                break
        X = np.column_stack([u, s]) @ self.frame.T + self.p
        if site is not None:
            X = X + site
        return X


def _graph(points, frame_inv, p, rho):
    w = (points - p) @ frame_inv.T
    inside = np.abs(w[:, 0]) <= rho
    return w[inside]


def build_chart(f, orbit, side_u=+1, side_s=+1, rho=0.05, max_gap=None):
    """Straightened chart at ``orbit.points[0]``, shrinking ``rho`` until both graphs are monotone."""
    p = np.asarray(orbit.points[0], float)
    k = orbit.period
    _, vu = _unstable_direction(f, p, k)
    _, vs = _unstable_direction(InverseMap(f), p, k)
    frame = np.column_stack([side_u * vu, side_s * vs])
    frame_inv = np.linalg.inv(frame)
    gap = rho / 50 if max_gap is None else max_gap
    for _ in range(20):
        pieces = {}
        ok = True
        for stab, col in ((UNSTABLE, 0), (STABLE, 1)):
            rows = []
            for sd in (+1, -1):
                b = grow_branch(f, orbit, stab, sd, budget=3 * rho, max_gap=gap)
                w = (b.points - p) @ frame_inv.T
                along = w[:, col]
                inside = np.abs(along) <= rho
                cut = np.argmax(~inside) if (~inside).any() else len(w)
                seg = w[:cut]
                if len(seg) > 2 and np.any(np.diff(np.abs(seg[:, col])) <= 0):
                    ok = False
                rows.append(seg)
            allw = np.vstack(rows)
            order = np.argsort(allw[:, col])
            pieces[col] = allw[order]
        if ok:
            break
        rho /= 2
        gap = rho / 50 if max_gap is None else max_gap
    else:
        raise GeometryError("local manifolds are not graphs over the axes at any tested radius")
    u_tab = pieces[0]
    s_tab = pieces[1]
    return StraightChart(
        p=p, frame=frame, rho=rho,
        u_grid=u_tab[:, 0], s_on_u=u_tab[:, 1],
        s_grid=s_tab[:, 1], u_on_s=s_tab[:, 0],
    )


def linear_chart(p, frame, rho=np.inf):
    zero = np.array([-1.0, 1.0])
    return StraightChart(np.asarray(p, float), np.asarray(frame, float), rho, zero, np.zeros(2), zero, np.zeros(2))


# -- gates -----------------------------------------------------------------

@dataclass
class ClosingGate:
    """Gate region at ``p`` in chart coordinates, scaled by ``scale``.

    sphere: ``{0 < X, Y <= 1, X Y <= eps}`` with ``(X, Y) = (x, y) / scale``;
    torus: ``{0 < x, y <= eps}`` (where ``x y <= eps^2`` holds automatically)
    at every lattice translate of ``p``.  ``swap`` exchanges the roles of the
    axes so the same region serves a stable branch.
    """

    chart: StraightChart
    eps: float
    surface: str
    scale: float = 1.0
    swap: bool = False

    def local(self, C):
        C = np.asarray(C, float) / self.scale
        return C[:, ::-1] if self.swap else C

    def contains_local(self, L):
        x, y = L[:, 0], L[:, 1]
        if self.surface == TORUS:
            return (x > 0) & (y > 0) & (x <= self.eps) & (y <= self.eps)
        return (x > 0) & (y > 0) & (x <= 1) & (y <= 1) & (x * y <= self.eps)

    def margin_local(self, L):
        """Positive inside, negative outside; zero set is the gate boundary."""
        x, y = L[:, 0], L[:, 1]
        if self.surface == TORUS:
            return np.minimum.reduce([x, y, self.eps - x, self.eps - y])
        return np.minimum.reduce([x, y, 1 - x, 1 - y, self.eps - x * y])

    def resized(self, eps):
        return ClosingGate(self.chart, eps, self.surface, self.scale, self.swap)

    def rotated(self):
        return ClosingGate(self.chart, self.eps, self.surface, self.scale, not self.swap)


def make_gate(f, orbit, eps=None, side_u=+1, side_s=+1, rho=0.05):
    """Gate at a hyperbolic point; linear maps get an exact global chart."""
    surface = f.domain_kind
    if surface not in (TORUS, SPHERE):
        raise PreconditionError("closing gates are defined on the torus and the sphere")
    if getattr(f, "is_linear", False) or type(f).__name__ == "TorusAutomorphism":
        p = np.asarray(orbit.points[0], float)
        _, vu = _unstable_direction(f, p, orbit.period)
        _, vs = _unstable_direction(InverseMap(f), p, orbit.period)
        chart = linear_chart(p, np.column_stack([side_u * vu, side_s * vs]))
    else:
        chart = build_chart(f, orbit, side_u, side_s, rho)
    if surface == TORUS:
        return ClosingGate(chart, TORUS_EPS if eps is None else eps, TORUS, 1.0)
    return ClosingGate(chart, SPHERE_EPS if eps is None else eps, SPHERE, chart.rho)


def _gate_reach(gate):
    if gate.surface == TORUS:
        pts = gate.eps * np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]])
    else:
        pts = gate.scale * np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]])
    X = pts @ gate.chart.frame.T
    return float(np.max(np.linalg.norm(X, axis=1))) * 1.5 + 1e-9


@dataclass
class GateEntry:
    point: np.ndarray
    site: np.ndarray
    index: int
    t: float
    arclength: float
    eps: float
    chart_point: np.ndarray


def _sites_for(gate, X):
    """Candidate lattice sites near each point (torus), or the origin only."""
    if gate.surface != TORUS:
        return [np.zeros((len(X), 2))]
    base = np.floor(X - gate.chart.p)
    reach = int(np.ceil(_gate_reach(gate))) + 1
    out = []
    for i in range(-reach, reach + 1):
        for j in range(-reach, reach + 1):
            out.append(base + np.array([i, j], float))
    return out


def _inside(gate, X):
    """Per-point membership and the site in which the point lies."""
    hit = np.zeros(len(X), bool)
    site = np.zeros((len(X), 2))
    for S in _sites_for(gate, X):
        C = gate.chart.to_chart(X - S)
        if gate.surface == SPHERE:
            C = _sphere_chart_points(gate, X)
        inside = gate.contains_local(gate.local(C)) & ~hit
        site[inside] = S[inside]
        hit |= inside
        if gate.surface == SPHERE:
            break
    return hit, site


def _sphere_chart_points(gate, X):
    """Chart coordinates on the cylinder, using the angle representative nearest ``p``."""
    d = np.array(X, float) - gate.chart.p
    d[:, 1] -= np.round(d[:, 1])
    return gate.chart.to_chart(gate.chart.p + d)


def first_gate_entry(branch: ManifoldBranch, gate: ClosingGate, adjust=True):
    """Arclength-first entry of ``branch`` into the gate, refined by bisection.

    The initial piece of the branch inside the gate's reach of ``p`` is skipped.
    A tangential boundary crossing triggers a retry with ``eps`` changed by 10%.
    """
    attempts = [gate.eps, 1.1 * gate.eps, 0.9 * gate.eps] if adjust else [gate.eps]
    last = None
    for eps in attempts:
        g = gate.resized(eps)
        try:
            return _first_entry(branch, g)
        except NonTransverseError as exc:
            last = exc
            log.info("tangential gate entry at eps=%g, adjusting", eps)
    raise last


def _first_entry(branch, gate):
    pts = branch.points
    p = gate.chart.p
    reach = _gate_reach(gate)
    dist = np.linalg.norm(pts - p, axis=1)
    away = np.nonzero(dist > reach)[0]
    # the owner's own gate is ignored until the branch has left its reach
    start = int(away[0]) if len(away) else len(pts)
    for lo in range(1, len(pts), BLOCK):
        hi = min(lo + BLOCK, len(pts))
        inside, site = _inside(gate, pts[lo:hi])
        own = np.all(site == 0, axis=1) & (np.arange(lo, hi) < start)
        inside &= ~own
        if inside.any():
            j = lo + int(np.argmax(inside))
            return _bisect_entry(branch, gate, j, site[j - lo])
    raise NotFoundError("no gate entry within the grown budget")


def _local_of(gate, X, site):
    X = np.atleast_2d(X)
    if gate.surface == SPHERE:
        return gate.local(_sphere_chart_points(gate, X))
    return gate.local(gate.chart.to_chart(X - site))


def _bisect_entry(branch, gate, j, site):
    a, b = branch.points[j - 1], branch.points[j]
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if gate.contains_local(_local_of(gate, a + mid * (b - a), site))[0]:
            hi = mid
        else:
            lo = mid
    q = a + hi * (b - a)
    # transversality: the segment must cut the boundary at a definite angle
    h = 1e-7
    m0 = gate.margin_local(_local_of(gate, a + max(hi - h, 0) * (b - a), site))[0]
    m1 = gate.margin_local(_local_of(gate, a + min(hi + h, 1) * (b - a), site))[0]
    slope = abs(m1 - m0) / (2 * h * np.linalg.norm(b - a) / max(gate.scale, 1e-300))
    if slope < TANGENT_ANGLE:
        raise NonTransverseError("gate boundary crossed tangentially", location=q)
    arc = branch.arclength[j - 1] + hi * (branch.arclength[j] - branch.arclength[j - 1])
    C = _local_of(gate, q, site)[0]
    return GateEntry(q, np.asarray(site, float), j, hi, float(arc), gate.eps, C)


# -- closed curves -----------------------------------------------------------

@dataclass
class ClosedCurveOnSurface:
    """Closed curve stored as lifted pieces ``(kind, points)``."""

    segments: list
    surface: str
    lift_start: np.ndarray = None
    lift_end: np.ndarray = None
    period: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))

    def __post_init__(self):
        pts = self.points
        if self.lift_start is None:
            self.lift_start = pts[0].copy()
        if self.lift_end is None:
            self.lift_end = pts[-1].copy()

    @property
    def points(self):
        out = [self.segments[0][1]]
        for _, pts in self.segments[1:]:
            out.append(pts[1:])
        return np.vstack(out)

    def translated(self, n):
        n = np.asarray(n, float)
        return ClosedCurveOnSurface([(k, p + n) for k, p in self.segments], self.surface,
                                    self.lift_start + n, self.lift_end + n, self.period)

    def reversed(self):
        segs = [(k, p[::-1].copy()) for k, p in self.segments[::-1]]
        return ClosedCurveOnSurface(segs, self.surface, self.lift_end.copy(), self.lift_start.copy(), self.period)

    def closure_gap(self):
        d = self.lift_end - self.lift_start
        fin = np.isfinite(self.period)
        d[fin] -= self.period[fin] * np.round(d[fin] / self.period[fin])
        return float(np.linalg.norm(d))


def concatenate(*curves):
    """Join curves end to start, translating each onto the previous end."""
    segs = list(curves[0].segments)
    end = curves[0].lift_end.copy()
    start = curves[0].lift_start.copy()
    for c in curves[1:]:
        shift = end - c.lift_start
        if np.linalg.norm(shift - np.round(shift)) > 1e-6:
            raise GeometryError("pieces do not join on the surface")
        c = c.translated(np.round(shift))
        first_kind, first_pts = c.segments[0]
        segs.append((first_kind, first_pts))
        segs.extend(c.segments[1:])
        end = c.lift_end.copy()
    return ClosedCurveOnSurface(segs, curves[0].surface, start, end, curves[0].period)


def closing_curve(branch: ManifoldBranch, entry: GateEntry, gate: ClosingGate, samples=64):
    """Branch arc up to ``q`` followed by the straight chart segment back to the corner."""
    if entry.arclength <= 0:
        raise PreconditionError("entry point coincides with the owner point")
    arc = np.vstack([gate.chart.p[None], branch.points[: entry.index], entry.point[None]])
    s = np.linspace(0.0, 1.0, samples + 1)[:, None]
    L = (1 - s) * entry.chart_point[None]
    C = L[:, ::-1] if gate.swap else L
    C = C * gate.scale
    if gate.surface == SPHERE:
        d = entry.point - gate.chart.p
        wrap = np.array([0.0, np.round(d[1])])
        closing = gate.chart.from_chart(C) + wrap
    else:
        closing = gate.chart.from_chart(C, site=entry.site)
    closing[0] = entry.point
    per = np.asarray(branch.period, float)
    surface = TORUS if gate.surface == TORUS else SPHERE
    curve = ClosedCurveOnSurface([("manifold", arc), ("gate", closing)], surface,
                                 arc[0].copy(), closing[-1].copy(), per)
    if curve.closure_gap() > 1e-8:
        raise GeometryError(f"curve does not close (gap {curve.closure_gap():.3g})")
    a1, e1 = arc[1:-2], arc[2:-1]
    a2, e2 = closing[1:-1], closing[2:]
    hit = segment_crossings(*_split(a1, e1), *_split(a2, e2), per)[0]
    if len(hit):
        raise IntegrityError("closing segment crosses the branch arc: a homoclinic point was missed")
    return curve


# -- homology and intersection numbers --------------------------------------

@dataclass
class HomologyClass:
    n: tuple | None

    @property
    def trivial(self):
        return self.n is None or all(v == 0 for v in self.n)

    def to_dict(self):
        return {"n": None if self.n is None else [int(v) for v in self.n]}


def homology_class(curve: ClosedCurveOnSurface, tol=1e-6):
    """Integer class ``lift_end - lift_start``; the sphere has only the trivial class."""
    if curve.surface == SPHERE:
        return HomologyClass(None)
    d = curve.lift_end - curve.lift_start
    n = np.round(d)
    if np.max(np.abs(d - n)) > tol:
        raise LiftInconsistencyError(f"lift displacement {d} is not an integer vector")
    return HomologyClass(tuple(int(v) for v in n))


def _split(a, e, max_len=MAX_PIECE):
    """Subdivide segments so each is shorter than ``max_len``."""
    if len(a) == 0:
        return a, e
    L = np.linalg.norm(e - a, axis=1)
    n = np.maximum(1, np.ceil(L / max_len).astype(int))
    if np.all(n == 1):
        return a, e
    rep = np.repeat(np.arange(len(a)), n)
    k = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    nn = np.repeat(n, n)
    d = e[rep] - a[rep]
    return a[rep] + (k / nn)[:, None] * d, a[rep] + ((k + 1) / nn)[:, None] * d


def signed_crossings(c1: ClosedCurveOnSurface, c2: ClosedCurveOnSurface, push_off=PUSH_OFF):
    """Signed crossings of ``c1`` with a generic push-off of ``c2`` on the surface."""
    per = np.asarray(c1.period, float)
    p1, p2 = c1.points, c2.points + push_off
    a1, e1 = _split(p1[:-1], p1[1:])
    a2, e2 = _split(p2[:-1], p2[1:])
    i, j, t, u, den = segment_crossings(a1, e1, a2, e2, per)
    if len(i):
        d1 = e1[i] - a1[i]
        d2 = e2[j] - a2[j]
        sin = np.abs(den) / (np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1))
        if sin.min() < 1e-9:
            q = int(np.argmin(sin))
            raise NonTransverseError("tangential intersection", location=a1[i[q]] + t[q] * d1[q])
    return np.sign(den).astype(int), a1[i] + t[:, None] * (e1[i] - a1[i]) if len(i) else np.empty((0, 2))


def intersection_number(c1: ClosedCurveOnSurface, c2: ClosedCurveOnSurface, check=True):
    """Algebraic intersection number by a signed sweep.

    On the torus the sweep must equal ``det(n1, n2)``; on the sphere chart it
    is returned as computed, the topological value being 0.
    """
    if c1.surface != c2.surface:
        raise PreconditionError("curves live on different surfaces")
    signs, _ = signed_crossings(c1, c2)
    total = int(signs.sum())
    if check and c1.surface == TORUS:
        n1 = homology_class(c1).n
        n2 = homology_class(c2).n
        det = n1[0] * n2[1] - n1[1] * n2[0]
        if det != total:
            raise IntegrityError(f"sweep {total} disagrees with det(n1, n2) = {det}")
    return total


def projected_line(n, base=(0.0, 0.0)):
    """Closed torus curve of class ``n``: the straight lift from ``base`` to ``base + n``."""
    b = np.asarray(base, float)
    pts = np.vstack([b, b + np.asarray(n, float)])
    return ClosedCurveOnSurface([("line", pts)], TORUS, b.copy(), pts[-1].copy())


def closing_alarm(crossings, sweep):
    """True when no homoclinic crossing was seen yet the sweep is +-1."""
    return len(crossings) == 0 and abs(int(sweep)) == 1


# -- fundamental domains -----------------------------------------------------

def winding_numbers(points, poly):
    """Winding number of a closed polygon (first vertex not repeated) around each point."""
    x, y = points[:, 0], points[:, 1]
    w = np.zeros(len(points), int)
    a, b = poly, np.roll(poly, -1, axis=0)
    for (x1, y1), (x2, y2) in zip(a, b):
        side = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        up = (y1 <= y) & (y2 > y) & (side > 0)
        down = (y1 > y) & (y2 <= y) & (side < 0)
        w += up.astype(int) - down.astype(int)
    return w


@dataclass
class DomainReport:
    unimodular: bool
    tiles: bool
    det: int
    samples: int
    bad_samples: int
    orientation: int

    def to_dict(self):
        return dict(unimodular=self.unimodular, tiles=self.tiles, det=self.det, samples=self.samples,
                    bad_samples=self.bad_samples, orientation=self.orientation)


def fundamental_domain_check(n_u, n_s, boundary, samples=10_000, radius=3.0, seed=0):
    """Unimodularity of the classes and a sampled tiling test for the bounded region.

    ``boundary`` is the closed polygon (lift coordinates) of the candidate
    domain.  The region is read through winding numbers, so retraced spikes of
    zero area do not matter; a boundary whose winding numbers take both signs,
    or exceed one in size, is rejected as non-simple.  Tiling holds when every
    sample in a disk has total winding one over all integer translates.
    """
    det = int(round(n_u[0] * n_s[1] - n_u[1] * n_s[0]))
    poly = np.asarray(boundary.points if hasattr(boundary, "points") else boundary, float)
    if np.linalg.norm(poly[0] - poly[-1]) < 1e-8:
        poly = poly[:-1]
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random(samples))
    a = 2 * np.pi * rng.random(samples)
    centre = poly.mean(axis=0)
    pts = centre + np.column_stack([r * np.cos(a), r * np.sin(a)])
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    kx = np.arange(np.floor(pts[:, 0].min() - hi[0]) - 1, np.ceil(pts[:, 0].max() - lo[0]) + 2)
    ky = np.arange(np.floor(pts[:, 1].min() - hi[1]) - 1, np.ceil(pts[:, 1].max() - lo[1]) + 2)
    total = np.zeros(samples, int)
    seen = set()
    for i in kx:
        for j in ky:
            shifted = pts - np.array([i, j])
            box = np.all((shifted >= lo) & (shifted <= hi), axis=1)
            if box.any():
                idx = np.nonzero(box)[0]
                w = winding_numbers(shifted[idx], poly)
                seen.update(np.unique(w).tolist())
                total[idx] += w
    nonzero = seen - {0}
    if len(nonzero) > 1 or any(abs(v) > 1 for v in nonzero):
        raise GeometryError(f"domain boundary is not simple (winding numbers {sorted(seen)})")
    orientation = nonzero.pop() if nonzero else 0
    bad = int(np.sum(total != orientation)) if orientation else samples
    return DomainReport(abs(det) == 1, bad == 0, det, samples, bad, orientation)


def square_domain():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])


# -- unboundedness -------------------------------------------------------------

def unboundedness_probe(branch_or_points, radius_schedule=(1.0, 2.0, 4.0, 8.0, 16.0)):
    """Whether the lifted branch leaves every disk of the schedule."""
    pts = branch_or_points.points if hasattr(branch_or_points, "points") else np.asarray(branch_or_points, float)
    pts = np.atleast_2d(pts)
    rmax = float(np.max(np.linalg.norm(pts - pts[0], axis=1)))
    reached = [float(r) for r in radius_schedule if rmax > r]
    status = "escapes" if len(reached) == len(radius_schedule) else "bounded-at-budget"
    return {"status": status, "max_radius": rmax, "radii_exceeded": reached}
