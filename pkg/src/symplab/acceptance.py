"""Acceptance criteria, shared by ``symplab verify`` and the test-suite.

Each criterion returns a list of :class:`Check` rows (expected, observed,
tolerance, pass).  Runtimes are measured by the runner and reported, but kept
out of the written artifacts so that two runs give identical files.
"""
from __future__ import annotations

import filecmp
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .cocycle import check_r_normal, finite_time_rates, orbit_sample
from .config import load_config
from .gates import (
    closing_alarm, closing_curve, concatenate, first_gate_entry, fundamental_domain_check,
    homology_class, intersection_number, make_gate, projected_line,
)
from .manifolds import STABLE, UNSTABLE, detect_crossings, grow_branch
from .maps import (
    PerturbedRotation, ProductSystem, StandardMap, TorusAutomorphism, TwistMap, check_symplectic,
    make_family, FAMILIES,
)
from .normal_form import birkhoff_a1, rotation_number_fit
from .periodic import HYPERBOLIC, N_MAX, TOL_HYP, TOL_RES, count_points, find_periodic_points, orbit_at
from .perturbation import (
    GeneratingBump, build_perturbation, product_center_perturbation, tune_a1,
)
from .tasks import run_task

DEFAULTS = {
    "tol_hyp": TOL_HYP,
    "tol_res": TOL_RES,
    "n_max": N_MAX,
    "stable_budget": 10.0,
    "fit_iterations": 3000,
}

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


@dataclass
class Check:
    name: str
    expected: object
    observed: object
    tolerance: object
    passed: bool

    def to_dict(self):
        return {"name": self.name, "expected": self.expected, "observed": self.observed,
                "tolerance": self.tolerance, "passed": bool(self.passed)}


@dataclass
class CriterionResult:
    number: int
    module: str
    title: str
    checks: list
    runtime: float
    limit: float | None
    error: str | None = None

    @property
    def within_time(self):
        return self.limit is None or self.runtime < self.limit

    @property
    def passed(self):
        return self.error is None and self.within_time and all(c.passed for c in self.checks)

    def to_dict(self):
        # runtime is left out on purpose: artifacts must be byte-identical across runs
        return {"criterion": self.number, "module": self.module, "title": self.title,
                "checks_passed": self.error is None and all(c.passed for c in self.checks),
                "error": self.error, "checks": [c.to_dict() for c in self.checks]}

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        lim = f" (limit {self.limit:g}s)" if self.limit else ""
        extra = f" error: {self.error}" if self.error else ""
        return f"[{mark}] criterion {self.number:2d} {self.module:15s} {self.title}: {self.runtime:.2f}s{lim}{extra}"


# -- criteria ---------------------------------------------------------------

def c1_calibration(tol):
    out = []
    for c in (0.1, 0.2):
        a1 = birkhoff_a1(TwistMap(theta=2.0, c=c), [0.0, 0.0], tol_res=tol["tol_res"], tol_hyp=tol["tol_hyp"]).a1
        expected = c / (2 * np.pi)
        out.append(Check(f"twist c={c}", expected, a1, 1e-8, abs(a1 - expected) < 1e-8))
    return out


def c2_cross_oracle(tol):
    out = []
    radii = np.linspace(0.005, 0.05, 8)
    for K in (0.3, 0.5, 0.8):
        f = StandardMap(K)
        a1 = birkhoff_a1(f, [0.0, 0.0], tol_res=tol["tol_res"], tol_hyp=tol["tol_hyp"]).a1
        fit = rotation_number_fit(f, [0.0, 0.0], radii, int(tol["fit_iterations"])).slope
        rel = abs(a1 - fit) / abs(fit)
        out.append(Check(f"standard K={K} a1 vs fit", fit, a1, "5% rel", rel < 0.05))
    return out


def c3_shift(tol):
    f = StandardMap(0.5)
    p = np.zeros(2)
    base = birkhoff_a1(f, p, tol_res=tol["tol_res"], tol_hyp=tol["tol_hyp"]).a1
    tuned = tune_a1(f, p, 0.05)
    shifted = birkhoff_a1(tuned.map, p, tol_res=tol["tol_res"], tol_hyp=tol["tol_hyp"]).a1
    out = [Check("a1 shift", 0.05, shifted - base, 0.0025, abs(shifted - base - 0.05) <= 0.0025)]
    rng = np.random.default_rng(3)
    radius = tuned.perturbation.support_ball
    pts = np.empty((0, 2))
    while len(pts) < 10_000:
        X = rng.random((20_000, 2))
        d = f.wrap_difference(X - p)
        pts = np.vstack([pts, X[np.hypot(d[:, 0], d[:, 1]) > radius]])
    pts = pts[:10_000]
    same = bool(np.array_equal(tuned.map(pts), f(pts)) and np.array_equal(tuned.perturbation(pts), pts))
    out.append(Check("bit-identical outside support", 10_000, int(same) * len(pts), 0, same))
    return out


def _minimal_period_ok(f, orbit, tol=1e-9):
    x = orbit.points[0][None]
    y = x
    for d in range(1, orbit.period + 1):
        y = f(y)
        gap = float(np.linalg.norm(f.wrap_difference(y - x)))
        if d < orbit.period and gap < tol:
            return False
    return gap < tol


def c4_census(tol):
    A = TorusAutomorphism()
    out = []
    for n in range(1, 9):
        orbits = find_periodic_points(A, n, tol_hyp=tol["tol_hyp"], tol_res=tol["tol_res"], n_max=int(tol["n_max"]))
        expected = int(round(abs(np.linalg.det(np.linalg.matrix_power(A.A, n) - np.eye(2)))))
        count = count_points(orbits)
        resid = max(o.residual for o in orbits)
        periods = all(_minimal_period_ok(A, o) for o in orbits)
        hyper = all(o.kind == HYPERBOLIC for o in orbits)
        ok = count == expected and resid < 1e-10 and periods and hyper
        out.append(Check(f"n={n} count/residual/period/class", expected,
                         {"count": count, "residual": resid, "minimal_periods": periods, "hyperbolic": hyper},
                         "exact; residual < 1e-10", ok))
    return out


def standard_crossing_runs(tol, budgets=(1e2, 1e3, 1e4)):
    f = StandardMap(1.2)
    o = orbit_at(f, [0.5, 0.0], tol_hyp=tol["tol_hyp"], tol_res=tol["tol_res"])
    s = grow_branch(f, o, STABLE, +1, budget=tol["stable_budget"])
    u = grow_branch(f, o, UNSTABLE, +1, budget=max(budgets))
    runs = {}
    for b in budgets:
        runs[b] = detect_crossings(u.truncated(b), s)
    return f, o, u, s, runs


def c5_homoclinic(tol):
    _, _, _, _, runs = standard_crossing_runs(tol)
    steep = [c for c in runs[1e3] if c.angle > 1e-3]
    n2, n4 = len(runs[1e2]), len(runs[1e4])
    return [
        Check("crossings with angle > 1e-3 at budget 1e3", ">= 1", len(steep), 0, len(steep) >= 1),
        Check("count(1e4) >= 2 count(1e2)", 2 * n2, n4, 0, n4 >= 2 * n2),
    ]


SPHERE_CASES = [
    (0.8, 0.0, +1, +1, 1e-2), (0.8, 0.0, -1, +1, 1e-2), (0.8, 0.0, +1, -1, 1e-2), (0.8, 0.0, -1, -1, 1e-2),
    (1.0, 0.1, +1, +1, 5e-3), (0.7, 0.0, -1, -1, 5e-3), (0.9, 0.2, +1, -1, 1e-2), (0.7, 0.1, -1, +1, 1e-2),
    (0.75, 0.05, -1, +1, 2e-2), (0.8, 0.1, +1, -1, 2e-2),
]


def closing_pair(f, orbit, gate_eps, side_u, side_s, budgets, tol):
    """Closing curves of the two branches, growing until both meet the gate."""
    from .errors import NotFoundError

    gate = make_gate(f, orbit, eps=gate_eps, side_u=side_u, side_s=side_s)
    last = None
    for b in budgets:
        u = grow_branch(f, orbit, UNSTABLE, side_u, budget=b)
        s = grow_branch(f, orbit, STABLE, side_s, budget=b)
        try:
            eu = first_gate_entry(u, gate)
            es = first_gate_entry(s, gate.rotated())
        except NotFoundError as exc:
            last = exc
            continue
        return u, s, eu, es, closing_curve(u, eu, gate), closing_curve(s, es, gate.rotated())
    raise last


def c6_sphere(tol):
    out = []
    for eps, q2, su, ss, geps in SPHERE_CASES:
        f = PerturbedRotation(eps=eps, q2=q2)
        o = orbit_at(f, [0.0, 0.0], tol_hyp=tol["tol_hyp"], tol_res=tol["tol_res"])
        *_, cu, cs = closing_pair(f, o, geps, su, ss, (10.0, 30.0, 50.0), tol)
        sweep = intersection_number(cu, cs)
        out.append(Check(f"sphere eps={eps} q2={q2} sides=({su},{ss}) gate={geps}", 0, sweep, 0, sweep == 0))
    runs = [(TorusAutomorphism(), [0.0, 0.0], "cat map"), (StandardMap(1.2), [0.5, 0.0], "standard K=1.2")]
    for f, x, label in runs:
        o = orbit_at(f, x, tol_hyp=tol["tol_hyp"], tol_res=tol["tol_res"])
        u, s, eu, es, cu, cs = closing_pair(f, o, None, 1, 1, (1e3,), tol)
        sweep = intersection_number(cu, cs, check=False)
        seen = detect_crossings(u.truncated(eu.arclength), s.truncated(es.arclength))
        alarm = closing_alarm(seen, sweep)
        out.append(Check(f"closing alarm silent on {label}", False, alarm, 0, not alarm))
    return out


def c7_torus(tol):
    out = []
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(20):
        n1, n2 = rng.integers(-5, 6, 2), rng.integers(-5, 6, 2)
        while not n1.any():
            n1 = rng.integers(-5, 6, 2)
        while not n2.any():
            n2 = rng.integers(-5, 6, 2)
        sweep = intersection_number(projected_line(n1, rng.random(2)), projected_line(n2, rng.random(2)), check=False)
        agree += int(sweep == int(n1[0] * n2[1] - n1[1] * n2[0]))
    out.append(Check("20 random line pairs: crossings = det", 20, agree, 0, agree == 20))
    f = TorusAutomorphism()
    o = orbit_at(f, [0.0, 0.0], tol_hyp=tol["tol_hyp"], tol_res=tol["tol_res"])
    _, _, _, _, cu, cs = closing_pair(f, o, 0.6, 1, 1, (200.0,), tol)
    nu, ns = homology_class(cu).n, homology_class(cs).n
    det = int(nu[0] * ns[1] - nu[1] * ns[0])
    out.append(Check("cat-map |det(n_u, n_s)|", 1, abs(det), 0, abs(det) == 1))
    g1 = concatenate(cu, cs.translated(nu), cu.translated(ns).reversed(), cs.reversed())
    dom = fundamental_domain_check(nu, ns, g1.points, samples=10_000, seed=0)
    out.append(Check("Q_eps tiling on 1e4 samples", 0, dom.bad_samples, 0, dom.tiles and dom.unimodular))
    return out


def c8_cocycle(tol):
    out = []
    P = ProductSystem(fiber=TwistMap(theta=0.0, c=0.0))
    r = finite_time_rates(P, orbit_sample(P, [0.1, 0.2, 0.3, 0.1], 100), 1)
    nu1 = float(r.nu_n.max())
    expected = (3 - np.sqrt(5)) / 2
    out.append(Check("cat x id: nu_1", expected, nu1, 1e-12, abs(nu1 - expected) < 1e-12))
    gamma_exact = bool(np.all(r.gamma_n == 1.0) and np.all(r.gamma_n_inv_bound == 1.0))
    out.append(Check("cat x id: gamma = 1", 1.0, float(r.gamma_n.min()), 0, gamma_exact))
    Q = ProductSystem(fiber=StandardMap(0.5))
    rng = np.random.default_rng(8)
    worst_margin, worst_sym, rate_band = np.inf, 0.0, True
    for s in (0.05, 0.1, 0.15, 0.2):
        x0 = np.concatenate([rng.random(2), [s, 0.0]])
        rates = finite_time_rates(Q, orbit_sample(Q, x0, 2000), 100)
        _, margin = check_r_normal(rates, 2.0)
        worst_margin = min(worst_margin, margin)
        worst_sym = max(worst_sym, rates.symmetry_defect)
        g = rates.gamma_n ** (1 / 100)
        rate_band &= bool(np.all((g >= 0.95) & (g <= 1.05)))
    out.append(Check("cat x standard island: r=2 margin", "> 0", worst_margin, 0, worst_margin > 0))
    out.append(Check("gamma_100^(1/100) in [0.95, 1.05]", [0.95, 1.05], rate_band, 0, rate_band))
    out.append(Check("sigma sigma' = 1", 0.0, worst_sym, 1e-6, worst_sym < 1e-6))
    return out


def perturbation_outputs():
    """Every kind of perturbation the package builds, for the symplecticity sweep."""
    f = StandardMap(0.5)
    maps = []
    for mode in ("hamiltonian-flow", "mixed-variable"):
        for power, direction in ((0, (0.0, 0.0)), (2, (0.0, 0.0)), (0, (0.3, -0.2))):
            amp = 2e-4 if mode == "mixed-variable" else 1e-2
            bump = GeneratingBump(center=(0.3, 0.4), support_radius=0.2, amplitude=amp, power=power,
                                  direction=direction, mode=mode)
            h = build_perturbation(bump, "torus")
            maps.append((f"bump {mode} power={power} dir={direction}", h))
    maps.append(("tuned standard map", tune_a1(f, [0.0, 0.0], 0.05).map))
    maps.append(("tuned mixed", tune_a1(f, [0.0, 0.0], 0.05, mode="mixed-variable").map))
    prod = ProductSystem(fiber=StandardMap(0.5))
    maps.append(("perturbed product", product_center_perturbation(prod, (0.3, 0.3), (0.0, 0.0), c=0.05)))
    return maps


def c9_symplectic(tol):
    out = []
    for name in sorted(FAMILIES):
        f = make_family(name)
        rep = check_symplectic(f, 1000, seed=9)
        out.append(Check(f"family {name}", "< 1e-8", rep.max_defect, 1e-8, rep.max_defect < 1e-8))
    for label, f in perturbation_outputs():
        rep = check_symplectic(f, 1000, seed=9)
        out.append(Check(label, "< 1e-8", rep.max_defect, 1e-8, rep.max_defect < 1e-8))
    return out


def demo_run(out_dir):
    """Run every bundled config into ``out_dir/<name>``; returns the manifest paths."""
    manifests = []
    for path in sorted(CONFIG_DIR.glob("*.toml")):
        cfg = load_config(path)
        target = Path(out_dir) / path.stem
        run_task(cfg, target)
        manifests.append(target / io.MANIFEST)
    return manifests


def c10_determinism(tol):
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        ma, mb = demo_run(a), demo_run(b)
        same = [filecmp.cmp(x, y, shallow=False) for x, y in zip(ma, mb)]
    return [Check("bundled configs twice: identical manifests", len(ma), sum(same), 0,
                  len(ma) > 0 and all(same))]


CRITERIA = [
    (1, "normal-form", "twist calibration a1 = c/2pi", c1_calibration, 1.0),
    (2, "normal-form", "a1 against rotation-number fit", c2_cross_oracle, 30.0),
    (3, "perturbation", "a1 shift and bit-identity", c3_shift, 30.0),
    (4, "periodic", "cat-map census", c4_census, 60.0),
    (5, "manifolds", "homoclinic crossings K=1.2", c5_homoclinic, 120.0),
    (6, "gates-topology", "sphere checksum and closing alarm", c6_sphere, None),
    (7, "gates-topology", "torus determinant law", c7_torus, 60.0),
    (8, "cocycle", "cocycle rates", c8_cocycle, 60.0),
    (9, "map-core", "symplecticity sweep", c9_symplectic, 10.0),
    (10, "cli", "determinism", c10_determinism, None),
]

MODULES = sorted({m for _, m, *_ in CRITERIA})


def run_criterion(number, overrides=None):
    tol = {**DEFAULTS, **(overrides or {})}
    num, module, title, fn, limit = next(c for c in CRITERIA if c[0] == number)
    t = time.perf_counter()
    error = None
    checks = []
    try:
        checks = fn(tol)
    except Exception as exc:  # a criterion that raises has failed
        error = f"{type(exc).__name__}: {exc}"
    return CriterionResult(num, module, title, checks, time.perf_counter() - t, limit, error)


def select(only=None):
    if not only:
        return [c[0] for c in CRITERIA]
    return [c[0] for c in CRITERIA if c[1] in set(only)]
