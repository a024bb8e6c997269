"""Compactly supported symplectic perturbations and the a1-shifting device.

A :class:`GeneratingBump` describes ``S(xi) = A sigma(xi) psi(|xi|^2)`` in a
linear area-one frame ``xi = P^-1 (X - p)``, where ``psi(rho) = rho^m chi(rho)``
and ``chi`` is a C^4 plateau equal to 1 on ``rho <= (f r)^2`` and 0 on
``rho >= r^2``.  ``sigma(xi) = 1 + a . xi / r`` tilts the bump; ``a = 0`` gives
a radial Hamiltonian whose time-1 map is a closed-form rotation.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import jets
from .errors import AmplitudeTooLargeError, GeometryError, PreconditionError, ShiftTooLargeError
from .jets import is_jet
from .maps import PLANE, SPHERE, TORUS, ComposedMap, ProductSystem, SymplecticMap
from .normal_form import symplectic_frame
from .periodic import lift_iterate
from .profiles import plateau, plateau_deriv, plateau_deriv2

log = logging.getLogger(__name__)

HAMILTONIAN, MIXED = "hamiltonian-flow", "mixed-variable"
CONTRACTION = 0.5


@dataclass
class GeneratingBump:
    center: tuple
    support_radius: float
    amplitude: float
    power: int = 0
    inner_fraction: float = 0.5
    direction: tuple = (0.0, 0.0)
    frame: tuple = ((1.0, 0.0), (0.0, 1.0))
    mode: str = HAMILTONIAN
    profile: str = "plateau-c4"

    def __post_init__(self):
        self.center = tuple(float(v) for v in self.center)
        self.direction = tuple(float(v) for v in self.direction)
        self.frame = tuple(tuple(float(v) for v in row) for row in self.frame)
        if self.support_radius <= 0:
            raise PreconditionError("support_radius must be positive")
        if not 0 < self.inner_fraction < 1:
            raise PreconditionError("inner_fraction must lie in (0, 1)")
        if self.mode not in (HAMILTONIAN, MIXED):
            raise PreconditionError(f"mode must be {HAMILTONIAN!r} or {MIXED!r}")
        if self.power not in (0, 2):
            raise PreconditionError("power must be 0 (bump) or 2 (twist generator)")
        if abs(np.linalg.det(np.array(self.frame)) - 1) > 1e-8:
            raise PreconditionError("frame must have determinant 1")

    @property
    def radial(self):
        return self.direction == (0.0, 0.0)

    def to_dict(self):
        return asdict(self)

    def content_hash(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# -- the generating function in frame coordinates ---------------------------

class _Generator:
    def __init__(self, bump: GeneratingBump):
        self.A = float(bump.amplitude)
        self.m = bump.power
        r = bump.support_radius
        self.r2 = r * r
        self.inner = (bump.inner_fraction * r) ** 2
        self.a = np.array(bump.direction) / r

    def psi(self, rho):
        chi = plateau(rho, self.inner, self.r2)
        return chi if self.m == 0 else rho * rho * chi

    def psi1(self, rho):
        c1 = plateau_deriv(rho, self.inner, self.r2)
        if self.m == 0:
            return c1
        return 2 * rho * plateau(rho, self.inner, self.r2) + rho * rho * c1

    def psi2(self, rho):
        c1 = plateau_deriv(rho, self.inner, self.r2)
        c2 = plateau_deriv2(rho, self.inner, self.r2)
        if self.m == 0:
            return c2
        chi = plateau(rho, self.inner, self.r2)
        return 2 * chi + 4 * rho * c1 + rho * rho * c2

    def sigma(self, u, v):
        return 1.0 + self.a[0] * u + self.a[1] * v

    def value(self, u, v):
        return self.A * self.sigma(u, v) * self.psi(u * u + v * v)

    def grad(self, u, v):
        rho = u * u + v * v
        s, p, p1 = self.sigma(u, v), self.psi(rho), self.psi1(rho)
        return (self.A * (2 * s * p1 * u + p * self.a[0]), self.A * (2 * s * p1 * v + p * self.a[1]))

    def hessian(self, u, v):
        u, v = np.asarray(u, float), np.asarray(v, float)
        rho = u * u + v * v
        s, p, p1, p2 = self.sigma(u, v), self.psi(rho), self.psi1(rho), self.psi2(rho)
        xi = np.stack([u, v], -1)
        hpsi = 4 * p2[..., None, None] * xi[..., :, None] * xi[..., None, :] + 2 * p1[..., None, None] * np.eye(2)
        gpsi = 2 * p1[..., None] * xi
        a = self.a
        H = s[..., None, None] * hpsi + a[:, None] * gpsi[..., None, :] + gpsi[..., :, None] * a[None, :]
        return self.A * H

    def sup_norms(self, n=400):
        """Sup over the support of ``|grad S|`` and ``||Hess S||`` (sampled)."""
        r = np.sqrt(self.r2)
        rad = np.linspace(0, r, n)
        ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        R, T = np.meshgrid(rad, ang)
        u, v = R * np.cos(T), R * np.sin(T)
        gu, gv = self.grad(u, v)
        H = self.hessian(u, v)
        return float(np.max(np.hypot(gu, gv))), float(np.max(np.linalg.norm(H, ord=2, axis=(-2, -1))))


# -- local maps in frame coordinates ----------------------------------------

def _radial_flow(gen, u, v, sign=1.0):
    """Exact time-(+-1) map of a radial Hamiltonian: rotation by ``-2 G'(rho)``."""
    rho = u * u + v * v
    phi = -2.0 * sign * gen.A * gen.psi1(rho)
    c, s = jets.cos(phi), jets.sin(phi)
    return c * u - s * v, s * u + c * v


def _radial_flow_jacobian(gen, u, v, sign=1.0):
    rho = u * u + v * v
    phi = -2.0 * sign * gen.A * gen.psi1(rho)
    dphi = -2.0 * sign * gen.A * gen.psi2(rho)
    c, s = np.cos(phi), np.sin(phi)
    out_u, out_v = c * u - s * v, s * u + c * v
    J = np.empty(u.shape + (2, 2))
    J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1] = c, -s, s, c
    grad = np.stack([2 * u * dphi, 2 * v * dphi], -1)
    rot = np.stack([-out_v, out_u], -1)
    return J + rot[..., :, None] * grad[..., None, :]


def _midpoint_steps(gen, bump):
    _, hess = gen.sup_norms()
    return max(4, int(np.ceil(8 * hess)))


def _gap(a, b):
    if is_jet(a) or is_jet(b):
        if not (is_jet(a) and is_jet(b)):
            return np.inf
        return float(np.max(np.abs(a.coeffs - b.coeffs)))
    return float(np.max(np.abs(a - b))) if np.size(a) else 0.0


def _single_midpoint(gen, u, v, h):
    nu, nv = u, v
    for _ in range(100):
        gu, gv = gen.grad(0.5 * (u + nu), 0.5 * (v + nv))
        tu, tv = u + h * gv, v - h * gu
        done = _gap(tu, nu) + _gap(tv, nv) < 1e-15
        nu, nv = tu, tv
        if done:
            break
    return nu, nv


def _midpoint_flow(gen, u, v, steps, sign=1.0):
    for _ in range(steps):
        u, v = _single_midpoint(gen, u, v, sign / steps)
    return u, v


def _midpoint_jacobian(gen, u, v, steps, sign=1.0):
    h = sign / steps
    Jt = np.array([[0.0, 1.0], [-1.0, 0.0]])
    D = np.broadcast_to(np.eye(2), u.shape + (2, 2)).copy()
    for _ in range(steps):
        nu, nv = _single_midpoint(gen, u, v, h)
        JH = Jt @ gen.hessian(0.5 * (u + nu), 0.5 * (v + nv))
        D = np.linalg.solve(np.eye(2) - 0.5 * h * JH, (np.eye(2) + 0.5 * h * JH) @ D)
        u, v = nu, nv
    return D


def _mixed_forward(gen, x, y):
    """``X = x + S_Y(x, Y)``, ``y = Y + S_x(x, Y)`` solved for ``Y`` by fixed point."""
    Y = y
    for _ in range(200):
        gx, _ = gen.grad(x, Y)
        nY = y - gx
        done = _gap(nY, Y) < 1e-15
        Y = nY
        if done:
            break
    _, gy = gen.grad(x, Y)
    return x + gy, Y


def _mixed_backward(gen, X, Y):
    x = X
    for _ in range(200):
        _, gy = gen.grad(x, Y)
        nx = X - gy
        done = _gap(nx, x) < 1e-15
        x = nx
        if done:
            break
    gx, _ = gen.grad(x, Y)
    return x, Y + gx


def _mixed_jacobian(gen, x, y):
    _, Y = _mixed_forward(gen, x, y)
    H = gen.hessian(x, Y)
    Sxx, SxY, SYY = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    dY_dx = -Sxx / (1 + SxY)
    dY_dy = 1 / (1 + SxY)
    J = np.empty(np.shape(x) + (2, 2))
    J[..., 0, 0] = 1 + SxY + SYY * dY_dx
    J[..., 0, 1] = SYY * dY_dy
    J[..., 1, 0] = dY_dx
    J[..., 1, 1] = dY_dy
    return J


# -- the perturbation as a map -----------------------------------------------

class PerturbationMap(SymplecticMap):
    """Near-identity symplectic map ``h``, exactly the identity off its support."""

    name = "perturbation"

    def __init__(self, bump: GeneratingBump, domain_kind=PLANE):
        self.bump = bump
        self.params = {"bump": bump.to_dict(), "hash": bump.content_hash()}
        self.domain_kind = domain_kind
        self.homotopy_matrix = np.eye(2) if domain_kind == TORUS else None
        self.gen = _Generator(bump)
        self.p = np.array(bump.center)
        self.P = np.array(bump.frame)
        self.P_inv = np.linalg.inv(self.P)
        grad_sup, hess_sup = self.gen.sup_norms()
        self.displacement_constant = grad_sup * bump.support_radius / abs(bump.amplitude) if bump.amplitude else 0.0
        if bump.mode == MIXED and hess_sup >= CONTRACTION:
            unit = hess_sup / abs(bump.amplitude)
            raise AmplitudeTooLargeError(
                f"amplitude {bump.amplitude} too large for the implicit solve", max_amplitude=CONTRACTION / unit
            )
        self.steps = _midpoint_steps(self.gen, bump) if (bump.mode == HAMILTONIAN and not bump.radial) else 0
        self.support_ball = bump.support_radius * float(np.linalg.norm(self.P, 2))

    # local map on frame coordinates
    def _local(self, u, v, sign):
        gen, b = self.gen, self.bump
        if b.mode == HAMILTONIAN:
            if b.radial:
                return _radial_flow(gen, u, v, sign)
            return _midpoint_flow(gen, u, v, self.steps, sign)
        return _mixed_forward(gen, u, v) if sign > 0 else _mixed_backward(gen, u, v)

    def _local_jacobian(self, u, v):
        gen, b = self.gen, self.bump
        if b.mode == HAMILTONIAN:
            if b.radial:
                return _radial_flow_jacobian(gen, u, v)
            return _midpoint_jacobian(gen, u, v, self.steps)
        return _mixed_jacobian(gen, u, v)

    def _frame(self, x, y):
        dx, dy = x - self.p[0], y - self.p[1]
        if not is_jet(dx) and self.domain_kind != PLANE:
            per = self.period
            if np.isfinite(per[0]):
                dx = dx - per[0] * np.round(dx / per[0])
            if np.isfinite(per[1]):
                dy = dy - per[1] * np.round(dy / per[1])
        Pi = self.P_inv
        return Pi[0, 0] * dx + Pi[0, 1] * dy, Pi[1, 0] * dx + Pi[1, 1] * dy

    def _apply(self, x, y, sign):
        u, v = self._frame(x, y)
        if is_jet(u):
            nu, nv = self._local(u, v, sign)
            du, dv = nu - u, nv - v
            P = self.P
            return x + (P[0, 0] * du + P[0, 1] * dv), y + (P[1, 0] * du + P[1, 1] * dv)
        u, v = np.asarray(u, float), np.asarray(v, float)
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        inside = u * u + v * v < self.gen.r2
        ox, oy = x.copy(), y.copy()
        if inside.any() and self.bump.amplitude != 0:
            iu, iv = u[inside], v[inside]
            nu, nv = self._local(iu, iv, sign)
            du, dv = nu - iu, nv - iv
            P = self.P
            ox[inside] = x[inside] + (P[0, 0] * du + P[0, 1] * dv)
            oy[inside] = y[inside] + (P[1, 0] * du + P[1, 1] * dv)
        return ox, oy

    def _forward(self, x, y):
        return self._apply(x, y, 1.0)

    def _backward(self, x, y):
        return self._apply(x, y, -1.0)

    def _jacobian(self, x, y):
        u, v = self._frame(np.asarray(x, float), np.asarray(y, float))
        u, v = np.broadcast_arrays(u, v)
        J = np.broadcast_to(np.eye(2), u.shape + (2, 2)).copy()
        inside = u * u + v * v < self.gen.r2
        if inside.any() and self.bump.amplitude != 0:
            D = self._local_jacobian(u[inside], v[inside])
            J[inside] = self.P @ D @ self.P_inv
        return J

    def sample(self, rng, n):
        # concentrate samples on the support, where the map is not the identity
        u = rng.uniform(-1.2, 1.2, (n, 2)) * self.bump.support_radius
        return self.p + u @ self.P.T


def build_perturbation(bump: GeneratingBump, domain_kind=PLANE) -> PerturbationMap:
    """The near-identity symplectic map generated by ``bump``."""
    return PerturbationMap(bump, domain_kind)


def compose_perturbed(f, h):
    """``g = f o h``; equal to ``f`` wherever ``h`` is the identity."""
    if h.domain_kind not in (f.domain_kind, PLANE):
        raise PreconditionError("perturbation and map live on different surfaces")
    g = ComposedMap(f, h)
    g.name = f"perturbed({f.name})"
    g.sample = f.sample
    return g


# -- targeted a1 shift ---------------------------------------------------------

def _twist_bump(p, frame, c, radius, mode=HAMILTONIAN):
    return GeneratingBump(center=tuple(p), support_radius=radius, amplitude=-np.pi * c / 2, power=2,
                          frame=tuple(map(tuple, frame)), mode=mode)


def max_twist_shift(radius, inner_fraction=0.5, bound=0.5):
    """Largest |c| keeping the twist perturbation within ``||Dh - I|| <= bound`` (estimate)."""
    gen = _Generator(GeneratingBump((0.0, 0.0), radius, 1.0, power=2, inner_fraction=inner_fraction))
    rho = np.linspace(0, radius**2, 2000)
    ang = np.abs(2 * gen.psi1(rho))
    dang = np.abs(2 * gen.psi2(rho))
    per_unit = np.max(ang + 2 * rho * dang) * np.pi / 2
    return bound / per_unit


@dataclass
class TunedMap:
    map: SymplecticMap
    perturbation: PerturbationMap
    shift: float
    radius: float
    max_shift: float
    notes: list = field(default_factory=list)


def tune_a1(f, p, c, k=1, radius=None, mode=HAMILTONIAN):
    """Compose ``f`` with a cut-off twist so that ``a1`` of ``f^k`` at ``p`` moves by ``c``.

    In the area-one frame of ``D_p f^k`` the perturbation is the time-1 map of
    ``-(pi c / 2) |xi|^4 chi(|xi|^2)``, which equals ``xi exp(2 pi i c |xi|^2)``
    on the plateau, so the 3-jet at ``p`` gains exactly ``c``.
    """
    p = np.asarray(p, float)
    _, M = lift_iterate(f, p, k)
    frame, _ = symplectic_frame(M[0])
    pts = [p]
    for _ in range(k - 1):
        pts.append(f(pts[-1][None])[0])
    if radius is None:
        radius = 0.1
        if k > 1:
            d = np.array([np.linalg.norm(np.linalg.solve(frame, f.wrap_difference(q - p))) for q in pts[1:]])
            radius = min(radius, 0.3 * d.min())
    max_shift = max_twist_shift(radius)
    if abs(c) > max_shift:
        raise ShiftTooLargeError(f"shift {c} too large for support radius {radius}", max_shift=max_shift)
    bump = _twist_bump(p, frame, c, radius, mode)
    h = build_perturbation(bump, f.domain_kind)
    g = compose_perturbed(f, h)
    return TunedMap(g, h, float(c), float(radius), float(max_shift))


# -- products ------------------------------------------------------------------

class PerturbedProduct:
    """``F o Phi`` where ``Phi`` is the exact time-1 flow of ``chi_b(|x - x0|^2) G(|xi|^2)``.

    ``chi_b`` is 1 on the base ball of radius ``base_radius`` and 0 outside
    twice that radius; ``G`` is the radial fiber generator of ``bump`` in its
    frame.  Over the base plateau only fiber coordinates move.
    """

    dim = 4

    def __init__(self, system: ProductSystem, base_point, base_radius, bump: GeneratingBump):
        if not system.is_direct:
            raise PreconditionError("center perturbations need a direct product")
        if not bump.radial or bump.mode != HAMILTONIAN:
            raise PreconditionError("the fiber generator must be a radial Hamiltonian bump")
        if 2 * base_radius >= 0.5:
            raise GeometryError("base support wraps around the torus (need 2 * base_radius < 0.5)")
        self.system = system
        self.base_point = np.asarray(base_point, float)
        self.base_radius = float(base_radius)
        self.bump = bump
        self.gen = _Generator(bump)
        self.P = np.array(bump.frame)
        self.P_inv = np.linalg.inv(self.P)
        self.s0 = np.array(bump.center)
        self.name = f"perturbed({system.name})"
        self.params = dict(system.params, base_point=self.base_point.tolist(), base_radius=self.base_radius,
                           bump=bump.to_dict(), hash=self.content_hash())
        self.fiber_kind = system.fiber_kind
        self.base = system.base
        self.fiber = system.fiber

    is_direct = False

    def content_hash(self):
        payload = {"bump": self.bump.to_dict(), "base_point": self.base_point.tolist(), "base_radius": self.base_radius}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    @property
    def period(self):
        return self.system.period

    def reduce(self, P):
        return self.system.reduce(P)

    def wrap_difference(self, d):
        return self.system.wrap_difference(d)

    def sample(self, rng, n):
        out = self.system.sample(rng, n)
        half = n // 2
        r = self.base_radius * 2.2
        out[:half, :2] = self.base_point + rng.uniform(-r, r, (half, 2))
        out[:half, 2:] = self.s0 + rng.uniform(-1.2, 1.2, (half, 2)) * self.bump.support_radius @ self.P.T
        return out

    def _coords(self, P):
        db = P[:, :2] - self.base_point
        db -= np.round(db)
        df = P[:, 2:] - self.s0
        per = self.system.fiber.period
        fin = np.isfinite(per)
        df[:, fin] -= per[fin] * np.round(df[:, fin] / per[fin])
        xi = df @ self.P_inv.T
        return db, xi

    def _chi(self, rb):
        r = self.base_radius
        return plateau(rb, r * r, 4 * r * r), plateau_deriv(rb, r * r, 4 * r * r), plateau_deriv2(rb, r * r, 4 * r * r)

    def flow(self, P, sign=1.0):
        """``Phi`` (or its inverse), exactly the identity outside the support."""
        P = np.atleast_2d(np.asarray(P, float))
        db, xi = self._coords(P)
        rb = np.sum(db * db, axis=1)
        rf = np.sum(xi * xi, axis=1)
        inside = (rb < 4 * self.base_radius**2) & (rf < self.gen.r2)
        out = P.copy()
        if not inside.any() or self.bump.amplitude == 0:
            return out
        c0, c1, _ = self._chi(rb[inside])
        G = self.gen.A * self.gen.psi(rf[inside])
        G1 = self.gen.A * self.gen.psi1(rf[inside])
        alpha = -2 * sign * c1 * G
        beta = -2 * sign * c0 * G1
        b, x = db[inside], xi[inside]
        nb = _rotate(b, alpha)
        nx = _rotate(x, beta)
        out[inside, :2] = P[inside, :2] + (nb - b)
        out[inside, 2:] = P[inside, 2:] + (nx - x) @ self.P.T
        return out

    def _flow_jacobian(self, P):
        P = np.atleast_2d(np.asarray(P, float))
        n = len(P)
        J = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
        db, xi = self._coords(P)
        rb = np.sum(db * db, axis=1)
        rf = np.sum(xi * xi, axis=1)
        inside = (rb < 4 * self.base_radius**2) & (rf < self.gen.r2)
        if not inside.any() or self.bump.amplitude == 0:
            return J
        b, x = db[inside], xi[inside]
        c0, c1, c2 = self._chi(rb[inside])
        A = self.gen.A
        G, G1, G2 = A * self.gen.psi(rf[inside]), A * self.gen.psi1(rf[inside]), A * self.gen.psi2(rf[inside])
        alpha, beta = -2 * c1 * G, -2 * c0 * G1
        # gradients with respect to (b, xi)
        ga = np.concatenate([-2 * c2[:, None] * G[:, None] * 2 * b, -2 * c1[:, None] * G1[:, None] * 2 * x], 1)
        gb = np.concatenate([-2 * c1[:, None] * G1[:, None] * 2 * b, -2 * c0[:, None] * G2[:, None] * 2 * x], 1)
        nb, nx = _rotate(b, alpha), _rotate(x, beta)
        D = np.zeros((len(b), 4, 4))
        D[:, :2, :2] = _rot_matrix(alpha)
        D[:, 2:, 2:] = _rot_matrix(beta)
        D[:, :2, :] += np.stack([-nb[:, 1], nb[:, 0]], 1)[:, :, None] * ga[:, None, :]
        D[:, 2:, :] += np.stack([-nx[:, 1], nx[:, 0]], 1)[:, :, None] * gb[:, None, :]
        T = np.eye(4)
        T[2:, 2:] = self.P
        Ti = np.eye(4)
        Ti[2:, 2:] = self.P_inv
        J[inside] = T @ D @ Ti
        return J

    def lift(self, P):
        return self.system.lift(self.flow(P))

    def __call__(self, P):
        return self.system(self.flow(P))

    def inverse(self, P):
        return self.flow(self.system.inverse(P), sign=-1.0)

    def jacobian(self, P):
        P = np.atleast_2d(np.asarray(P, float))
        Q = self.flow(P)
        return self.system.jacobian(Q) @ self._flow_jacobian(P)

    def fiber_map(self, x_base):
        """Fiber map over a base point on the plateau (where the base does not move)."""
        db = np.asarray(x_base, float) - self.base_point
        db -= np.round(db)
        if np.sum(db * db) > self.base_radius**2:
            return self.system.fiber
        local = GeneratingBump(self.bump.center, self.bump.support_radius, self.bump.amplitude, self.bump.power,
                               self.bump.inner_fraction, self.bump.direction, self.bump.frame, self.bump.mode)
        h = build_perturbation(local, self.system.fiber.domain_kind)
        return compose_perturbed(self.system.fiber, h)

    def describe(self):
        return {"family": self.name, "domain_kind": "product", "parameters": dict(self.params)}


def _rotate(v, ang):
    c, s = np.cos(ang), np.sin(ang)
    return np.stack([c * v[:, 0] - s * v[:, 1], s * v[:, 0] + c * v[:, 1]], 1)


def _rot_matrix(ang):
    c, s = np.cos(ang), np.sin(ang)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def product_center_perturbation(system: ProductSystem, base_point, fiber_point, c=None, bump=None,
                                base_radius=0.1, fiber_radius=0.1):
    """Perturb a direct product along one center leaf.

    Either pass a radial ``bump`` on the fiber, or ``c`` to build the a1-shifting
    twist in the frame of the fiber map's linear part at ``fiber_point``.
    """
    if bump is None:
        if c is None:
            raise PreconditionError("give either c or bump")
        fiber = system.fiber
        _, M = lift_iterate(fiber, np.asarray(fiber_point, float), 1)
        frame, _ = symplectic_frame(M[0])
        bump = _twist_bump(fiber_point, frame, c, fiber_radius)
    return PerturbedProduct(system, base_point, base_radius, bump)
