import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from symplab.acceptance import DEFAULTS, closing_pair
from symplab.errors import IntegrityError, LiftInconsistencyError, PreconditionError
from symplab.gates import (
    TORUS, ClosedCurveOnSurface, closing_alarm, concatenate, fundamental_domain_check, homology_class,
    intersection_number, make_gate, projected_line, square_domain, unboundedness_probe, winding_numbers,
)
from symplab.maps import PerturbedRotation, StandardMap, TorusAutomorphism, TwistMap
from symplab.periodic import orbit_at

CAT = TorusAutomorphism()
CAT_O = orbit_at(CAT, [0.0, 0.0])


def _det(a, b):
    return int(a[0] * b[1] - a[1] * b[0])


def _line_crossings_oracle(n1, b1, n2, b2):
    """Signed count of intersections of two straight closed curves, by solving on the lift."""
    # b1 + t n1 = b2 + s n2 + k, t, s in [0, 1); k ranges over a box large enough to cover
    n1, n2 = np.asarray(n1, float), np.asarray(n2, float)
    M = np.column_stack([n1, -n2])
    det = np.linalg.det(M)
    if abs(det) < 1e-12:
        return 0
    total = 0
    R = int(np.abs(n1).sum() + np.abs(n2).sum()) + 2
    for kx in range(-R, R + 1):
        for ky in range(-R, R + 1):
            t, s = np.linalg.solve(M, np.asarray(b2, float) + [kx, ky] - b1)
            # snap round-off so crossings at shared vertices count once
            t, s = (float(round(v)) if abs(v - round(v)) < 1e-12 else v for v in (t, s))
            if 0 <= t < 1 and 0 <= s < 1:
                total += int(np.sign(n1[0] * n2[1] - n1[1] * n2[0]))
    return total


@pytest.mark.parametrize(
    "eps,nu,ns",
    [(0.05, (13, 8), (-5, 8)), (0.1, (5, 3), (-5, 8)), (0.3, (2, 1), (-2, 3)), (0.6, (1, 0), (-1, 1))],
)
def test_cat_closing_classes(eps, nu, ns):
    *_, cu, cs = closing_pair(CAT, CAT_O, eps, 1, 1, (200.0,), DEFAULTS)
    assert homology_class(cu).n == nu
    assert homology_class(cs).n == ns
    # the checked sweep raises if it disagrees with the determinant
    assert intersection_number(cu, cs) == _det(nu, ns)


def test_cat_determinants_are_fibonacci_products():
    fib = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]
    dets = []
    for eps in (0.6, 0.3, 0.1, 0.05):
        *_, cu, cs = closing_pair(CAT, CAT_O, eps, 1, 1, (200.0,), DEFAULTS)
        dets.append(_det(homology_class(cu).n, homology_class(cs).n))
    assert dets == sorted(dets)
    assert all(any(d == a * b for a in fib for b in fib) for d in dets)


def test_unimodular_closing_domain_tiles():
    *_, cu, cs = closing_pair(CAT, CAT_O, 0.6, 1, 1, (200.0,), DEFAULTS)
    nu, ns = homology_class(cu).n, homology_class(cs).n
    g = concatenate(cu, cs.translated(nu), cu.translated(ns).reversed(), cs.reversed())
    assert g.closure_gap() < 1e-9
    rep = fundamental_domain_check(nu, ns, g.points, samples=10_000)
    assert rep.unimodular and rep.tiles and rep.bad_samples == 0


def test_domain_check_square_and_doubled():
    assert fundamental_domain_check((1, 0), (0, 1), square_domain()).tiles
    doubled = np.array([[0, 0], [2, 0], [2, 1], [0, 1], [0, 0]], float)
    rep = fundamental_domain_check((2, 0), (0, 1), doubled)
    assert not rep.unimodular and not rep.tiles and rep.det == 2


def test_winding_numbers_of_square():
    sq = square_domain()[:-1]
    pts = np.array([[0.5, 0.5], [1.5, 0.5], [0.5, -0.2]])
    assert winding_numbers(pts, sq).tolist() == [1, 0, 0]
    assert winding_numbers(pts, sq[::-1]).tolist() == [-1, 0, 0]


@settings(max_examples=40)
@example((0, 1), (3, 3), (0.0, 0.0), (0.0, 0.0))
@given(
    st.tuples(st.integers(-4, 4), st.integers(-4, 4)).filter(any),
    st.tuples(st.integers(-4, 4), st.integers(-4, 4)).filter(any),
    st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True)),
    st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True)),
)
def test_line_sweep_is_determinant(n1, n2, b1, b2):
    c1, c2 = projected_line(n1, b1), projected_line(n2, b2)
    sweep = intersection_number(c1, c2, check=False)
    assert sweep == _det(n1, n2)
    if _det(n1, n2) != 0:
        assert sweep == _line_crossings_oracle(n1, b1, n2, b2)


def test_sweep_antisymmetric_and_translation_invariant():
    c1, c2 = projected_line((2, 1), (0.1, 0.3)), projected_line((-1, 3), (0.7, 0.2))
    s = intersection_number(c1, c2)
    assert intersection_number(c2, c1) == -s
    assert intersection_number(c1.reversed(), c2) == -s
    assert intersection_number(c1.translated((3, -2)), c2) == s


def test_inconsistent_class_raises_integrity_error():
    c1 = projected_line((1, 0), (0.1, 0.2))
    pts = np.array([[0.3, 0.4], [1.3, 0.4]])
    liar = ClosedCurveOnSurface([("line", pts)], TORUS, pts[0].copy(), pts[0] + [0.0, 1.0])
    with pytest.raises(IntegrityError):
        intersection_number(c1, liar)


def test_non_integer_lift_rejected():
    pts = np.array([[0.0, 0.0], [0.5, 0.25]])
    c = ClosedCurveOnSurface([("line", pts)], TORUS)
    with pytest.raises(LiftInconsistencyError):
        homology_class(c)


@pytest.mark.parametrize("eps,q2,su,ss,geps", [(0.8, 0.0, 1, 1, 1e-2), (0.8, 0.0, -1, -1, 1e-2), (1.0, 0.1, 1, 1, 5e-3)])
def test_sphere_sweep_is_zero(eps, q2, su, ss, geps):
    f = PerturbedRotation(eps=eps, q2=q2)
    o = orbit_at(f, [0.0, 0.0])
    *_, cu, cs = closing_pair(f, o, geps, su, ss, (10.0, 30.0, 50.0), DEFAULTS)
    assert homology_class(cu).trivial and homology_class(cs).trivial
    assert intersection_number(cu, cs) == 0


def test_alarm_logic():
    assert closing_alarm([], 1) and closing_alarm([], -1)
    assert not closing_alarm([], 0)
    assert not closing_alarm([object()], 1)


@pytest.mark.parametrize("f,x", [(CAT, [0.0, 0.0]), (StandardMap(1.2), [0.5, 0.0])])
def test_alarm_silent_on_known_maps(f, x):
    from symplab.manifolds import detect_crossings

    o = orbit_at(f, x)
    u, s, eu, es, cu, cs = closing_pair(f, o, None, 1, 1, (1e3,), DEFAULTS)
    sweep = intersection_number(cu, cs, check=False)
    seen = detect_crossings(u.truncated(eu.arclength), s.truncated(es.arclength))
    assert not closing_alarm(seen, sweep)


def test_gate_needs_closed_surface():
    f = TwistMap(theta=1.0, c=0.1)
    with pytest.raises(PreconditionError):
        make_gate(f, orbit_at(f, [0.0, 0.0]))


def test_unboundedness_probe():
    u = closing_pair(CAT, CAT_O, 0.6, 1, 1, (200.0,), DEFAULTS)[0]
    assert unboundedness_probe(u)["status"] == "escapes"
    short = unboundedness_probe(np.array([[0.0, 0.0], [0.5, 0.0]]))
    assert short["status"] == "bounded-at-budget" and short["radii_exceeded"] == []
