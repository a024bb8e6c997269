"""Area-preserving map families with exact jets and universal-cover lifts.

Every family implements ``_forward``/``_backward`` once, generically over
floats, arrays and :class:`~symplab.jets.TaylorJet`; evaluation, Jacobians
and 3-jets all come from that single formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import InvalidMapError, PreconditionError
from .jets import Jet2, TaylorJet
from .profiles import plateau, plateau_deriv, plateau_deriv2

TWO_PI = 2.0 * math.pi
POLAR_CAP = 1e-3

PLANE, TORUS, SPHERE = "plane", "torus", "sphere-cylinder-chart"


def _check_params(params):
    for key, value in params.items():
        arr = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InvalidMapError(f"parameter {key!r} is not finite: {value!r}")


class SymplecticMap:
    """Base class for planar area-preserving maps.

    Subclasses set ``domain_kind`` and implement ``_forward`` and ``_backward``
    on coordinate pairs.  ``homotopy_matrix`` is the linear part of the lift
    for torus maps: ``F(X + m) = F(X) + A m``.
    """

    name = "map"
    domain_kind = PLANE
    homotopy_matrix = None
    dim = 2

    def __init__(self, **params):
        _check_params(params)
        self.params = dict(params)

    # -- formulas -------------------------------------------------------
    def _forward(self, x, y):
        raise NotImplementedError

    def _backward(self, x, y):
        raise NotImplementedError

    def _jacobian(self, x, y):
        """Vectorised Jacobian; the default goes through first-order jets."""
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        flat = pts.reshape(-1, 2)
        out = np.array([self.jet(p, order=1).linear for p in flat])
        return out.reshape(pts.shape[:-1] + (2, 2))

    # -- domain ---------------------------------------------------------
    @property
    def period(self):
        if self.domain_kind == TORUS:
            return np.array([1.0, 1.0])
        if self.domain_kind == SPHERE:
            return np.array([np.inf, 1.0])
        return np.array([np.inf, np.inf])

    def reduce(self, X):
        X = np.array(X, dtype=float)
        per = self.period
        for k in range(2):
            if np.isfinite(per[k]):
                r = np.mod(X[..., k], per[k])
                X[..., k] = np.where(r >= per[k], 0.0, r)
        return X

    def wrap_difference(self, d):
        """Shortest representative of a coordinate difference."""
        d = np.array(d, dtype=float)
        per = self.period
        for k in range(2):
            if np.isfinite(per[k]):
                d[..., k] -= per[k] * np.round(d[..., k] / per[k])
        return d

    def sample(self, rng, n):
        if self.domain_kind == TORUS:
            return rng.random((n, 2))
        if self.domain_kind == SPHERE:
            z = rng.uniform(-1 + POLAR_CAP, 1 - POLAR_CAP, n)
            return np.column_stack([z, rng.random(n)])
        lo, hi = self.sample_box
        return rng.uniform(lo, hi, (n, 2))

    sample_box = (-1.0, 1.0)

    # -- evaluation -----------------------------------------------------
    def lift(self, X):
        X = np.asarray(X, dtype=float)
        x, y = self._forward(X[..., 0], X[..., 1])
        return np.stack([np.asarray(x, float), np.asarray(y, float)], axis=-1)

    def lift_inverse(self, X):
        X = np.asarray(X, dtype=float)
        x, y = self._backward(X[..., 0], X[..., 1])
        return np.stack([np.asarray(x, float), np.asarray(y, float)], axis=-1)

    def __call__(self, X):
        return self.reduce(self.lift(X))

    evaluate = __call__

    def inverse(self, X):
        return self.reduce(self.lift_inverse(X))

    def jacobian(self, X):
        X = np.asarray(X, dtype=float)
        return self._jacobian(X[..., 0], X[..., 1])

    def jet(self, x, order=3) -> Jet2:
        """Exact Taylor jet at ``x`` (image in lift coordinates)."""
        jets._check_order(order)
        x = np.asarray(x, dtype=float)
        vx = TaylorJet.variable(x[0], 0, order)
        vy = TaylorJet.variable(x[1], 1, order)
        fx, fy = self._forward(vx, vy)
        fx = fx if isinstance(fx, TaylorJet) else TaylorJet.constant(fx, order)
        fy = fy if isinstance(fy, TaylorJet) else TaylorJet.constant(fy, order)
        return Jet2.from_components(x, fx, fy)

    def iterate_jet(self, x, k, order=3) -> Jet2:
        """Jet of ``f^k`` at ``x`` by jet composition along the orbit."""
        x = np.asarray(x, dtype=float)
        total = self.jet(x, order)
        point = self.reduce(total.value)
        for _ in range(k - 1):
            step = self.jet(point, order)
            total = step.compose(total)
            point = self.reduce(step.value)
        return total

    def describe(self):
        return {"family": self.name, "domain_kind": self.domain_kind, "parameters": dict(self.params)}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class TorusAutomorphism(SymplecticMap):
    """Linear map of T^2 induced by an integer matrix of determinant one."""

    name = "toral-automorphism"
    domain_kind = TORUS

    def __init__(self, matrix=((2, 1), (1, 1))):
        A = np.asarray(matrix)
        if A.shape != (2, 2) or not np.all(np.isfinite(A.astype(float))):
            raise InvalidMapError("matrix must be a finite 2x2 array")
        if not np.all(A == np.round(A)):
            raise InvalidMapError("matrix must have integer entries")
        A = A.astype(int)
        if round(np.linalg.det(A)) != 1:
            raise InvalidMapError("matrix must lie in SL(2, Z)")
        super().__init__(matrix=A.tolist())
        self.A = A
        self.A_inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])
        self.homotopy_matrix = A

    def _forward(self, x, y):
        A = self.A
        return A[0, 0] * x + A[0, 1] * y, A[1, 0] * x + A[1, 1] * y

    def _backward(self, x, y):
        B = self.A_inv
        return B[0, 0] * x + B[0, 1] * y, B[1, 0] * x + B[1, 1] * y

    def _jacobian(self, x, y):
        shape = np.broadcast(x, y).shape
        return np.broadcast_to(self.A.astype(float), shape + (2, 2)).copy()

    @property
    def is_hyperbolic(self):
        return abs(np.trace(self.A)) > 2


class StandardMap(SymplecticMap):
    """Chirikov standard map on T^2, with an optional second harmonic.

    ``y' = y - K/(2 pi) sin 2 pi x - K2/(4 pi) sin 4 pi x``, ``x' = x + y'``.
    With this sign (0, 0) is elliptic for 0 < K < 4 and (1/2, 0) is hyperbolic.
    """

    name = "standard"
    domain_kind = TORUS
    homotopy_matrix = np.array([[1, 1], [0, 1]])

    def __init__(self, K=1.0, K2=0.0):
        super().__init__(K=float(K), K2=float(K2))
        self.K = float(K)
        self.K2 = float(K2)

    def _kick(self, x):
        k = -self.K / TWO_PI * jets.sin(TWO_PI * x)
        if self.K2:
            k = k - self.K2 / (2 * TWO_PI) * jets.sin(2 * TWO_PI * x)
        return k

    def _forward(self, x, y):
        yp = y + self._kick(x)
        return x + yp, yp

    def _backward(self, x, y):
        xo = x - y
        return xo, y - self._kick(xo)

    def _jacobian(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        c = self.K * np.cos(TWO_PI * x) + self.K2 * np.cos(2 * TWO_PI * x)
        J = np.empty(x.shape + (2, 2))
        J[..., 0, 0] = 1 - c
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = -c
        J[..., 1, 1] = 1.0
        return J


class TwoHarmonicStandardMap(StandardMap):
    name = "standard-2h"

    def __init__(self, K=1.0, K2=0.3):
        super().__init__(K=K, K2=K2)


class TwistMap(SymplecticMap):
    """Model twist ``z -> exp(i theta) z exp(i c |z|^2)`` on the plane."""

    name = "twist"
    domain_kind = PLANE

    def __init__(self, theta=2.0, c=0.1):
        super().__init__(theta=float(theta), c=float(c))
        self.theta = float(theta)
        self.c = float(c)

    def _rotate(self, x, y, sign):
        phi = sign * (self.theta + self.c * (x * x + y * y))
        cs, sn = jets.cos(phi), jets.sin(phi)
        return x * cs - y * sn, x * sn + y * cs

    def _forward(self, x, y):
        return self._rotate(x, y, 1.0)

    def _backward(self, x, y):
        return self._rotate(x, y, -1.0)


class PerturbedRotation(SymplecticMap):
    """Perturbed rotation of S^2 in cylinder coordinates ``(z, theta)``.

    ``theta' = theta + alpha + eps z``, ``z' = z + eps q(theta')`` with
    ``q(t) = sin(2 pi t)/(2 pi) + q2 sin(4 pi t)/(4 pi)``; the area form is
    ``dz ^ dtheta``.  For ``alpha = 0`` the point ``(0, 0)`` is hyperbolic.
    """

    name = "sphere-rotation"
    domain_kind = SPHERE

    def __init__(self, alpha=0.0, eps=0.8, q2=0.0):
        super().__init__(alpha=float(alpha), eps=float(eps), q2=float(q2))
        self.alpha = float(alpha)
        self.eps = float(eps)
        self.q2 = float(q2)

    def _q(self, t):
        q = jets.sin(TWO_PI * t) / TWO_PI
        if self.q2:
            q = q + self.q2 * jets.sin(2 * TWO_PI * t) / (2 * TWO_PI)
        return q

    def _forward(self, z, t):
        tp = t + self.alpha + self.eps * z
        return z + self.eps * self._q(tp), tp

    def _backward(self, z, t):
        zo = z - self.eps * self._q(t)
        return zo, t - self.alpha - self.eps * zo

    def _jacobian(self, z, t):
        z, t = np.broadcast_arrays(np.asarray(z, float), np.asarray(t, float))
        tp = t + self.alpha + self.eps * z
        qp = np.cos(TWO_PI * tp) + self.q2 * np.cos(2 * TWO_PI * tp)
        e = self.eps
        J = np.empty(z.shape + (2, 2))
        J[..., 0, 0] = 1 + e * e * qp
        J[..., 0, 1] = e * qp
        J[..., 1, 0] = e
        J[..., 1, 1] = 1.0
        return J


class HamiltonianBumpFlow(SymplecticMap):
    """Time-1 map of ``H = A (x - cx) b(|x - c|^2 / r^2)`` by fixed-step RK4.

    ``b`` is the C^4 plateau profile; the flow is the identity outside the disk.
    RK4 is not exactly symplectic: the defect shrinks like ``step**4``.
    """

    name = "bump-flow"
    domain_kind = PLANE

    def __init__(self, amplitude=0.1, center=(0.0, 0.0), radius=1.0, step=1e-3):
        super().__init__(amplitude=float(amplitude), center=list(map(float, center)), radius=float(radius), step=float(step))
        self.amplitude = float(amplitude)
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.n_steps = max(1, int(round(1.0 / float(step))))
        self.h = 1.0 / self.n_steps

    sample_box = (-1.2, 1.2)

    def _field(self, x, y):
        dx, dy = x - self.center[0], y - self.center[1]
        r2 = self.radius**2
        rho = (dx * dx + dy * dy) / r2
        b = plateau(rho, 0.0, 1.0)
        db = plateau_deriv(rho, 0.0, 1.0)
        A = self.amplitude
        Hx = A * (b + dx * db * (2 * dx / r2))
        Hy = A * dx * db * (2 * dy / r2)
        return Hy, -Hx

    def _field_jacobian(self, x, y):
        dx, dy = x - self.center[0], y - self.center[1]
        r2 = self.radius**2
        rho = (dx * dx + dy * dy) / r2
        b1 = plateau_deriv(rho, 0.0, 1.0)
        b2 = plateau_deriv2(rho, 0.0, 1.0)
        A = self.amplitude
        Hxx = A * (6 * dx * b1 / r2 + 4 * dx**3 * b2 / r2**2)
        Hxy = A * (2 * dy * b1 / r2 + 4 * dx * dx * dy * b2 / r2**2)
        Hyy = A * dx * (2 * b1 / r2 + 4 * dy * dy * b2 / r2**2)
        D = np.empty(np.shape(dx) + (2, 2))
        D[..., 0, 0], D[..., 0, 1] = Hxy, Hyy
        D[..., 1, 0], D[..., 1, 1] = -Hxx, -Hxy
        return D

    def _jacobian(self, x, y):
        # RK4 on the variational equations alongside the flow
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        x, y = x.copy(), y.copy()
        M = np.broadcast_to(np.eye(2), x.shape + (2, 2)).copy()
        h = self.h
        for _ in range(self.n_steps):
            k1 = self._field(x, y)
            D1 = self._field_jacobian(x, y)
            x2, y2 = x + 0.5 * h * k1[0], y + 0.5 * h * k1[1]
            k2 = self._field(x2, y2)
            D2 = self._field_jacobian(x2, y2)
            x3, y3 = x + 0.5 * h * k2[0], y + 0.5 * h * k2[1]
            k3 = self._field(x3, y3)
            D3 = self._field_jacobian(x3, y3)
            x4, y4 = x + h * k3[0], y + h * k3[1]
            k4 = self._field(x4, y4)
            D4 = self._field_jacobian(x4, y4)
            L1 = D1 @ M
            L2 = D2 @ (M + 0.5 * h * L1)
            L3 = D3 @ (M + 0.5 * h * L2)
            L4 = D4 @ (M + h * L3)
            M = M + h / 6 * (L1 + 2 * L2 + 2 * L3 + L4)
            x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        return M

    def _flow(self, x, y, h):
        for _ in range(self.n_steps):
            k1 = self._field(x, y)
            k2 = self._field(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
            k3 = self._field(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
            k4 = self._field(x + h * k3[0], y + h * k3[1])
            x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        return x, y

    def _forward(self, x, y):
        return self._flow(x, y, self.h)

    def _backward(self, x, y):
        return self._flow(x, y, -self.h)


class InverseMap(SymplecticMap):
    """``f^{-1}`` as a map in its own right."""

    def __init__(self, base: SymplecticMap):
        self.base = base
        self.params = {"of": base.describe()}
        self.name = f"inverse({base.name})"
        self.domain_kind = base.domain_kind
        A = base.homotopy_matrix
        if A is not None:
            A = np.asarray(A)
            self.homotopy_matrix = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])
        self.sample_box = base.sample_box

    def _forward(self, x, y):
        return self.base._backward(x, y)

    def _backward(self, x, y):
        return self.base._forward(x, y)

    def _jacobian(self, x, y):
        X = np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float)), axis=-1)
        return np.linalg.inv(self.base.jacobian(self.base.lift_inverse(X)))


class ComposedMap(SymplecticMap):
    """``outer ∘ inner``; jets come from jet composition."""

    def __init__(self, outer: SymplecticMap, inner: SymplecticMap):
        if outer.domain_kind != inner.domain_kind and PLANE not in (outer.domain_kind, inner.domain_kind):
            raise PreconditionError("incompatible domains for composition")
        self.outer, self.inner = outer, inner
        self.domain_kind = outer.domain_kind
        self.homotopy_matrix = outer.homotopy_matrix
        self.name = f"{outer.name}∘{inner.name}"
        self.params = {"outer": outer.describe(), "inner": inner.describe()}
        self.sample_box = outer.sample_box

    def _forward(self, x, y):
        return self.outer._forward(*self.inner._forward(x, y))

    def _backward(self, x, y):
        return self.inner._backward(*self.outer._backward(x, y))

    def lift(self, X):
        return self.outer.lift(self.inner.lift(X))

    def lift_inverse(self, X):
        return self.inner.lift_inverse(self.outer.lift_inverse(X))

    def _jacobian(self, x, y):
        X = np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float)), axis=-1)
        Y = self.inner.lift(X)
        return self.outer.jacobian(Y) @ self.inner.jacobian(X)

    def jet(self, x, order=3):
        inner = self.inner.jet(x, order)
        outer = self.outer.jet(inner.value, order)
        return outer.compose(inner)


def iterate(f, X, n):
    """``f^n`` applied to points (lift coordinates kept for ``lift=True`` maps)."""
    X = np.asarray(X, dtype=float)
    for _ in range(n):
        X = f(X)
    return X


def orbit(f, x, n):
    out = [np.asarray(x, dtype=float)]
    for _ in range(n - 1):
        out.append(f(out[-1]))
    return np.array(out)


# ---------------------------------------------------------------------------
# product and skew-product systems on T^2 x S


class ProductSystem:
    """``(x, s) -> (A x, phi(x)(s))`` on ``T^2 x S``.

    For a direct product ``phi`` is a constant fiber map; a skew product passes
    ``fiber_at``, a function of the base point returning the fiber map.
    """

    dim = 4

    def __init__(self, base_matrix=((2, 1), (1, 1)), fiber: SymplecticMap | None = None, fiber_at=None, name="product"):
        self.base = TorusAutomorphism(base_matrix)
        if not self.base.is_hyperbolic:
            raise InvalidMapError("base automorphism must be hyperbolic (|trace| > 2)")
        if (fiber is None) == (fiber_at is None):
            raise InvalidMapError("give exactly one of fiber or fiber_at")
        self.fiber = fiber
        self._fiber_at = fiber_at
        self.name = name
        proto = fiber if fiber is not None else fiber_at(np.zeros(2))
        self.fiber_kind = proto.domain_kind
        self.params = {"base_matrix": self.base.A.tolist()}
        if fiber is not None:
            self.params["fiber"] = fiber.describe()

    @property
    def is_direct(self):
        return self.fiber is not None

    def fiber_map(self, x_base) -> SymplecticMap:
        return self.fiber if self.fiber is not None else self._fiber_at(np.asarray(x_base, float))

    @property
    def period(self):
        proto = self.fiber_map(np.zeros(2))
        return np.concatenate([[1.0, 1.0], proto.period])

    def reduce(self, P):
        P = np.array(P, dtype=float)
        per = self.period
        for k in range(4):
            if np.isfinite(per[k]):
                P[..., k] = np.mod(P[..., k], per[k])
        return P

    def __call__(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty_like(P)
        out[:, :2] = self.base(P[:, :2])
        if self.is_direct:
            out[:, 2:] = self.fiber(P[:, 2:])
        else:
            for i, row in enumerate(P):
                out[i, 2:] = self.fiber_map(row[:2])(row[2:])
        return out

    def lift(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty_like(P)
        out[:, :2] = self.base.lift(P[:, :2])
        if self.is_direct:
            out[:, 2:] = self.fiber.lift(P[:, 2:])
        else:
            base = self.base.reduce(P[:, :2])
            for i, row in enumerate(P):
                out[i, 2:] = self.fiber_map(base[i]).lift(row[2:])
        return out

    def wrap_difference(self, d):
        d = np.array(d, dtype=float)
        per = self.period
        for k in range(4):
            if np.isfinite(per[k]):
                d[..., k] -= per[k] * np.round(d[..., k] / per[k])
        return d

    def inverse(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        out = np.empty_like(P)
        out[:, :2] = self.base.inverse(P[:, :2])
        if self.is_direct:
            out[:, 2:] = self.fiber.inverse(P[:, 2:])
        else:
            for i, row in enumerate(out):
                out[i, 2:] = self.fiber_map(row[:2]).inverse(P[i, 2:])
        return out

    def jacobian(self, P):
        """4x4 Jacobian; the base-to-fiber block is nonzero only for skew products."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        J = np.zeros((len(P), 4, 4))
        J[:, :2, :2] = self.base.A
        if self.is_direct:
            J[:, 2:, 2:] = self.fiber.jacobian(P[:, 2:])
        else:
            for i, row in enumerate(P):
                row = self.reduce(row)
                J[i, 2:, 2:] = self.fiber_map(row[:2]).jacobian(row[2:])
                J[i, 2:, :2] = self._coupling(row)
        return J

    def _coupling(self, row, h=1e-6):
        # d(fiber image)/d(base point), central differences; skew products only
        cols = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            plus = self.fiber_map(row[:2] + e).lift(row[2:])
            minus = self.fiber_map(row[:2] - e).lift(row[2:])
            cols.append((plus - minus) / (2 * h))
        return np.column_stack(cols)

    def sample(self, rng, n):
        base = rng.random((n, 2))
        fib = self.fiber_map(np.zeros(2)).sample(rng, n)
        return np.column_stack([base, fib])

    def describe(self):
        return {"family": self.name, "domain_kind": "product", "parameters": dict(self.params)}


class SkewStandardFiber:
    """Fiber family ``x -> StandardMap(K0 + K1 cos 2 pi x_1)``."""

    def __init__(self, K0=0.5, K1=0.2):
        self.K0, self.K1 = float(K0), float(K1)
        _check_params({"K0": self.K0, "K1": self.K1})

    def __call__(self, x_base):
        return StandardMap(K=self.K0 + self.K1 * math.cos(TWO_PI * float(x_base[0])))


def skew_product(base_matrix=((2, 1), (1, 1)), K0=0.5, K1=0.2):
    fam = SkewStandardFiber(K0, K1)
    sys = ProductSystem(base_matrix, fiber_at=fam, name="skew-standard")
    sys.params.update({"K0": fam.K0, "K1": fam.K1})
    sys._coupling = _skew_coupling(fam).__get__(sys)
    return sys


def _skew_coupling(fam):
    def coupling(self, row):
        # exact derivative of the fiber image with respect to x_1
        x1, s = row[0], row[2:]
        dK = -fam.K1 * TWO_PI * math.sin(TWO_PI * x1)
        dy = -dK / TWO_PI * math.sin(TWO_PI * s[0])
        return np.array([[dy, 0.0], [dy, 0.0]])

    return coupling


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class SymplecticReport:
    max_defect: float
    tol: float
    sample_count: int
    form_defect: float | None = None

    @property
    def passed(self):
        return self.max_defect < self.tol


_OMEGA4 = np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=float)


def check_symplectic(f, sample_count=1000, tol=1e-8, seed=0) -> SymplecticReport:
    """Max of ``|det Df - 1|`` over random samples.

    For 4D systems the product-form defect ``max |Df^T Ω Df - Ω|`` is reported
    separately as ``form_defect``.
    """
    if sample_count < 1:
        raise PreconditionError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    pts = f.sample(rng, sample_count)
    J = f.jacobian(pts)
    worst = float(np.max(np.abs(np.linalg.det(J) - 1.0)))
    form = None
    if getattr(f, "dim", 2) == 4:
        defect = np.einsum("nji,jk,nkl->nil", J, _OMEGA4, J) - _OMEGA4
        form = float(np.max(np.abs(defect)))
    return SymplecticReport(worst, tol, sample_count, form)


# ---------------------------------------------------------------------------
# registry

FAMILIES = {
    "toral-automorphism": (TorusAutomorphism, "matrix: 2x2 integer matrix in SL(2,Z) (default [[2,1],[1,1]])"),
    "standard": (StandardMap, "K: kick strength; K2: second-harmonic strength (default 0)"),
    "standard-2h": (TwoHarmonicStandardMap, "K, K2: two-harmonic standard map (default K2=0.3)"),
    "twist": (TwistMap, "theta: rotation angle (rad); c: twist, z -> e^{i theta} z e^{i c |z|^2}"),
    "sphere-rotation": (PerturbedRotation, "alpha: rotation; eps: perturbation; q2: second harmonic of q"),
    "bump-flow": (HamiltonianBumpFlow, "amplitude, center, radius, step: time-1 RK4 flow of a bump Hamiltonian"),
    "product": (None, "base_matrix; fiber.family + fiber parameters: direct product T^2 x S"),
    "skew-standard": (skew_product, "base_matrix; K0, K1: fiber K(x) = K0 + K1 cos 2 pi x_1"),
}


def make_family(name, **params):
    """Build a map or system from a family name and parameter table."""
    if name not in FAMILIES:
        raise InvalidMapError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    if name == "product":
        fiber_table = dict(params.pop("fiber", {"family": "standard", "K": 0.5}))
        fiber = make_family(fiber_table.pop("family"), **fiber_table)
        return ProductSystem(params.pop("base_matrix", ((2, 1), (1, 1))), fiber=fiber, **params)
    ctor = FAMILIES[name][0]
    try:
        return ctor(**params)
    except TypeError as exc:
        raise InvalidMapError(f"bad parameters for {name!r}: {exc}") from exc
