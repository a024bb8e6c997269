import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symplab.errors import InvalidMapError
from symplab.maps import (
    FAMILIES, ComposedMap, HamiltonianBumpFlow, PerturbedRotation, ProductSystem, StandardMap,
    TorusAutomorphism, TwistMap, check_symplectic, make_family, skew_product,
)


def test_cat_map_fixes_origin():
    assert np.array_equal(TorusAutomorphism()([[0.0, 0.0]]), [[0.0, 0.0]])


@pytest.mark.parametrize("K", [0.1, 0.7, 1.2, 4.5])
def test_standard_map_fixes_half(K):
    f = StandardMap(K)
    assert np.allclose(f.wrap_difference(f([[0.5, 0.0]]) - [0.5, 0.0]), 0.0, atol=1e-15)


def test_product_of_fixed_points():
    P = ProductSystem(fiber=StandardMap(0.5))
    assert np.allclose(P([[0.0, 0.0, 0.5, 0.0]]), [[0.0, 0.0, 0.5, 0.0]], atol=1e-15)


def test_cat_lift_is_linear():
    assert np.allclose(TorusAutomorphism().lift([1.25, 0.5]), [3.0, 1.75])


def test_standard_kick_sign():
    # y' = y - K/(2 pi) sin(2 pi x): a small positive x is pushed back toward 0
    K, x = 0.5, 0.01
    out = StandardMap(K).lift([x, 0.0])
    assert out[1] == pytest.approx(-K / (2 * np.pi) * np.sin(2 * np.pi * x))
    assert out[0] == pytest.approx(x + out[1])


def test_results_reduced_to_unit_square(rng):
    X = rng.normal(scale=5, size=(500, 2))
    Y = StandardMap(1.3)(X)
    assert np.all((Y >= 0) & (Y < 1))


def test_nan_parameter_rejected():
    with pytest.raises(InvalidMapError):
        StandardMap(float("nan"))
    with pytest.raises(InvalidMapError):
        PerturbedRotation(eps=float("inf"))
    with pytest.raises(InvalidMapError):
        TorusAutomorphism([[1, 1], [1, 1]])


@given(
    st.floats(-3, 3), st.floats(-3, 3), st.integers(-4, 4), st.integers(-4, 4),
    st.sampled_from([TorusAutomorphism(), TorusAutomorphism([[3, 2], [1, 1]]), StandardMap(1.3),
                     make_family("standard-2h")]),
)
def test_lift_equivariance(x, y, m1, m2, f):
    X = np.array([x, y])
    m = np.array([m1, m2])
    assert np.allclose(f.lift(X + m), f.lift(X) + f.homotopy_matrix @ m, atol=1e-10)


@pytest.mark.parametrize("name", sorted(n for n in FAMILIES if n not in ("product", "skew-standard")))
def test_inverse_consistency(name, rng):
    f = make_family(name)
    X = f.sample(rng, 200)
    d = f.wrap_difference(f.inverse(f(X)) - X)
    assert np.max(np.abs(d)) < 1e-10


def test_product_inverse_consistency(rng):
    for system in (ProductSystem(fiber=StandardMap(0.5)), skew_product()):
        P = system.sample(rng, 100)
        d = system.wrap_difference(system.inverse(system(P)) - P)
        assert np.max(np.abs(d)) < 1e-10


def test_cat_defect_is_exactly_zero():
    assert check_symplectic(TorusAutomorphism(), 1000).max_defect == 0.0


def test_standard_defect_tiny():
    assert check_symplectic(StandardMap(1.3), 1000).max_defect < 1e-12


def test_rk4_bump_flow_defect():
    assert check_symplectic(HamiltonianBumpFlow(step=1e-3), 300).max_defect < 1e-8


@given(st.floats(0.01, 5.0), st.floats(-1.0, 1.0), st.floats(0.1, 1.5), st.floats(-0.5, 0.5),
       st.floats(-np.pi, np.pi))
def test_random_parameters_stay_symplectic(K, K2, eps, q2, theta):
    for f in (StandardMap(K, K2), PerturbedRotation(alpha=theta, eps=eps, q2=q2), TwistMap(theta, K)):
        assert check_symplectic(f, 200, tol=1e-8).passed


@given(st.floats(0, 1), st.floats(0, 1))
def test_jet_linear_part_is_jacobian(x, y):
    for f in (StandardMap(1.1, 0.3), PerturbedRotation(eps=0.8, q2=0.2)):
        assert np.allclose(f.jet([x, y]).linear, f.jacobian(np.array([x, y])), atol=1e-10)


def test_jet_of_composition(rng):
    f = StandardMap(0.9)
    ff = ComposedMap(f, f)
    for x in rng.random((100, 2)):
        a, b = f.iterate_jet(x, 2), ff.jet(x)
        # images may differ by a deck translation; every other coefficient agrees
        assert np.allclose(f.wrap_difference(a.value - b.value), 0.0, atol=1e-12)
        a.coeffs[:, 0, 0] = b.coeffs[:, 0, 0] = 0.0
        assert a.max_abs_diff(b) < 1e-8


def test_product_projects_to_base(rng):
    for system in (ProductSystem(fiber=StandardMap(0.5)), skew_product()):
        P = system.sample(rng, 50)
        assert np.allclose(system(P)[:, :2], system.base(P[:, :2]))


def test_direct_fiber_ignores_base(rng):
    system = ProductSystem(fiber=StandardMap(0.5))
    P = system.sample(rng, 20)
    Q = P.copy()
    Q[:, :2] = rng.random((20, 2))
    assert np.array_equal(system(P)[:, 2:], system(Q)[:, 2:])


def test_skew_fiber_depends_on_base():
    system = skew_product()
    a = system([[0.0, 0.3, 0.2, 0.1]])[0, 2:]
    b = system([[0.25, 0.3, 0.2, 0.1]])[0, 2:]
    assert not np.allclose(a, b)


def test_product_needs_hyperbolic_base():
    with pytest.raises(InvalidMapError):
        ProductSystem([[1, 1], [0, 1]], fiber=StandardMap(0.5))


def test_unknown_family():
    with pytest.raises(InvalidMapError):
        make_family("henon")
