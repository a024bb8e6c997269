import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symplab.acceptance import perturbation_outputs
from symplab.errors import AmplitudeTooLargeError, GeometryError, PreconditionError, ShiftTooLargeError
from symplab.maps import ProductSystem, StandardMap, TwistMap, check_symplectic
from symplab.normal_form import birkhoff_a1
from symplab.perturbation import (
    HAMILTONIAN, MIXED, GeneratingBump, PerturbedProduct, build_perturbation, compose_perturbed, max_twist_shift,
    product_center_perturbation, tune_a1,
)

STD = StandardMap(0.5)
A1 = birkhoff_a1(STD, [0.0, 0.0]).a1


def _outside(f, p, radius, n, rng):
    pts = np.empty((0, 2))
    while len(pts) < n:
        X = rng.random((4 * n, 2))
        d = f.wrap_difference(X - p)
        pts = np.vstack([pts, X[np.hypot(d[:, 0], d[:, 1]) > radius]])
    return pts[:n]


@pytest.mark.parametrize("c", [0.0, 0.01, 0.02, 0.05, -0.03])
def test_shift_is_exact(c):
    tuned = tune_a1(STD, [0.0, 0.0], c)
    assert birkhoff_a1(tuned.map, [0.0, 0.0]).a1 - A1 == pytest.approx(c, abs=1e-12)


def test_shift_on_twist_matches_calibration():
    # a1 of the twist is c / 2pi, so a shift by d must read as c' = c + 2 pi d
    f = TwistMap(theta=1.0, c=0.1)
    tuned = tune_a1(f, [0.0, 0.0], 0.02)
    a1 = birkhoff_a1(tuned.map, [0.0, 0.0]).a1
    assert a1 == pytest.approx(0.1 / (2 * np.pi) + 0.02, abs=1e-12)


def test_shift_mixed_mode_matches_flow():
    flow = birkhoff_a1(tune_a1(STD, [0.0, 0.0], 0.03).map, [0.0, 0.0]).a1
    mixed = birkhoff_a1(tune_a1(STD, [0.0, 0.0], 0.03, mode=MIXED).map, [0.0, 0.0]).a1
    assert mixed == pytest.approx(flow, abs=1e-9)


def test_bit_identity_outside_support(rng):
    tuned = tune_a1(STD, [0.0, 0.0], 0.05)
    pts = _outside(STD, np.zeros(2), tuned.perturbation.support_ball, 10_000, rng)
    assert np.array_equal(tuned.perturbation(pts), pts)
    assert np.array_equal(tuned.map(pts), STD(pts))
    assert np.array_equal(tuned.map.inverse(STD(pts)), STD.inverse(STD(pts)))


def test_period_two_tuning_keeps_orbit():
    from symplab.periodic import find_periodic_points

    orbit = [o for o in find_periodic_points(STD, 2) if o.kind == "elliptic"][0]
    p = orbit.points[0]
    base = birkhoff_a1(STD, p, 2).a1
    tuned = tune_a1(STD, p, 0.01, k=2)
    assert np.linalg.norm(STD.wrap_difference(tuned.map(tuned.map(p[None]))[0] - p)) < 1e-12
    assert birkhoff_a1(tuned.map, p, 2).a1 - base == pytest.approx(0.01, abs=1e-9)


def test_shift_too_large():
    with pytest.raises(ShiftTooLargeError) as info:
        tune_a1(STD, [0.0, 0.0], 5.0)
    assert 0 < info.value.max_shift < 5.0
    tune_a1(STD, [0.0, 0.0], 0.9 * info.value.max_shift)


def test_amplitude_too_large_for_mixed_solve():
    with pytest.raises(AmplitudeTooLargeError) as info:
        build_perturbation(GeneratingBump((0.0, 0.0), 0.2, 1.0, direction=(0.3, 0.1), mode=MIXED))
    ok = 0.5 * info.value.max_amplitude
    build_perturbation(GeneratingBump((0.0, 0.0), 0.2, ok, direction=(0.3, 0.1), mode=MIXED))


@pytest.mark.parametrize("kw", [
    dict(support_radius=0.0), dict(inner_fraction=1.0), dict(mode="euler"), dict(power=1),
    dict(frame=((2.0, 0.0), (0.0, 1.0))),
])
def test_bump_validation(kw):
    args = dict(center=(0.0, 0.0), support_radius=0.2, amplitude=0.01)
    args.update(kw)
    with pytest.raises(PreconditionError):
        GeneratingBump(**args)


@pytest.mark.parametrize("label,f", perturbation_outputs())
def test_outputs_are_symplectic(label, f):
    assert check_symplectic(f, 1000, seed=5).max_defect < 1e-8


@pytest.mark.parametrize("mode", [HAMILTONIAN, MIXED])
@pytest.mark.parametrize("direction", [(0.0, 0.0), (0.3, -0.2)])
def test_inverse_and_jacobian(mode, direction, rng):
    amp = 2e-4 if mode == MIXED else 1e-2
    h = build_perturbation(GeneratingBump((0.1, 0.2), 0.3, amp, direction=direction, mode=mode))
    X = h.sample(rng, 500)
    assert np.max(np.abs(h.inverse(h(X)) - X)) < 1e-12
    e = 1e-6
    J = h.jacobian(X)
    for k in range(2):
        dx = np.zeros(2)
        dx[k] = e
        fd = (h(X + dx) - h(X - dx)) / (2 * e)
        assert np.max(np.abs(fd - J[:, :, k])) < 1e-6


def test_mixed_and_flow_agree_to_second_order(rng):
    r = 2.0
    X = rng.uniform(-r, r, (5000, 2))
    for A in (1e-3, 2e-3, 4e-3):
        h = [build_perturbation(GeneratingBump((0.0, 0.0), r, A, direction=(0.3, -0.2), inner_fraction=0.25,
                                               mode=m)) for m in (HAMILTONIAN, MIXED)]
        d = np.max(np.linalg.norm(h[0](X) - h[1](X), axis=1))
        assert d < 10 * A**2


def test_radial_flow_preserves_radius(rng):
    h = build_perturbation(GeneratingBump((0.0, 0.0), 0.5, 0.05, power=2))
    X = rng.uniform(-0.5, 0.5, (1000, 2))
    assert np.allclose(np.hypot(*h(X).T), np.hypot(*X.T), atol=1e-14)


def test_compose_rejects_other_surface():
    h = build_perturbation(GeneratingBump((0.0, 0.0), 0.2, 0.01), "sphere-cylinder-chart")
    with pytest.raises(PreconditionError):
        compose_perturbed(STD, h)


def test_content_hash_stable():
    a = GeneratingBump((0.0, 0.0), 0.2, 0.01)
    b = GeneratingBump((0, 0), 0.2, 0.01)
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != GeneratingBump((0.0, 0.0), 0.2, 0.02).content_hash()


def test_product_fiber_shift():
    P = ProductSystem(fiber=StandardMap(0.5))
    pp = product_center_perturbation(P, (0.3, 0.3), (0.0, 0.0), c=0.05)
    on = birkhoff_a1(pp.fiber_map(np.array([0.3, 0.3])), [0.0, 0.0]).a1
    assert on - A1 == pytest.approx(0.05, abs=1e-12)
    assert pp.fiber_map(np.array([0.8, 0.8])) is P.fiber


def test_product_symplectic_and_local(rng):
    P = ProductSystem(fiber=StandardMap(0.5))
    pp = product_center_perturbation(P, (0.3, 0.3), (0.0, 0.0), c=0.05)
    assert check_symplectic(pp, 500, seed=1).max_defect < 1e-8
    far = np.column_stack([rng.uniform(0.6, 0.9, (200, 2)), rng.random((200, 2))])
    assert np.array_equal(pp(far), P(far))


def test_product_geometry_errors():
    P = ProductSystem(fiber=StandardMap(0.5))
    with pytest.raises(GeometryError):
        product_center_perturbation(P, (0.3, 0.3), (0.0, 0.0), c=0.05, base_radius=0.3)
    with pytest.raises(PreconditionError):
        product_center_perturbation(P, (0.3, 0.3), (0.0, 0.0))
    with pytest.raises(PreconditionError):
        PerturbedProduct(P, (0.3, 0.3), 0.1, GeneratingBump((0.0, 0.0), 0.1, 0.01, direction=(0.1, 0.0)))


@settings(max_examples=25)
@given(st.floats(-0.95, 0.95), st.floats(0.05, 0.15))
def test_shift_property(fraction, radius):
    c = fraction * max_twist_shift(radius)
    tuned = tune_a1(STD, [0.0, 0.0], c, radius=radius)
    assert birkhoff_a1(tuned.map, [0.0, 0.0]).a1 - A1 == pytest.approx(c, abs=1e-10)
