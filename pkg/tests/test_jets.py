import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symplab import jets
from symplab.errors import UnsupportedOrderError
from symplab.jets import Jet2, TaylorJet, linear_jet
from symplab.maps import StandardMap, TwistMap

small = st.floats(-0.8, 0.8)


def _poly_value(jet, h):
    i, j = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    return float(np.sum(jet.coeffs * h[0] ** i * h[1] ** j))


def _random_jet(seed, order=3):
    c = np.random.default_rng(seed).normal(size=(4, 4))
    return TaylorJet(c, order)


def test_truncation_error_is_fourth_order():
    # a cubic Taylor polynomial misses f by O(h^4): halving h divides the error by ~16
    x0, y0 = 0.3, -0.2
    f = lambda x, y: jets.sin(x * y) * jets.exp(x) + jets.sqrt(2.0 + y) / (1.0 + x * x)
    jet = f(TaylorJet.variable(x0, 0), TaylorJet.variable(y0, 1))
    d = np.array([0.6, -0.8])
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        exact = float(f(x0 + h * d[0], y0 + h * d[1]))
        errs.append(abs(_poly_value(jet, h * d) - exact))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(12 < r < 20 for r in ratios)


def test_coefficients_against_finite_differences():
    x0, y0 = 0.1, 0.4
    f = lambda x, y: jets.cos(x + 2 * y) * x
    jet = f(TaylorJet.variable(x0, 0), TaylorJet.variable(y0, 1))
    h = 1e-3
    fx = lambda x, y: float(f(x, y))
    dxx = (fx(x0 + h, y0) - 2 * fx(x0, y0) + fx(x0 - h, y0)) / h**2
    dxy = (fx(x0 + h, y0 + h) - fx(x0 + h, y0 - h) - fx(x0 - h, y0 + h) + fx(x0 - h, y0 - h)) / (4 * h * h)
    assert jet.coeffs[2, 0] == pytest.approx(dxx / 2, abs=1e-5)
    assert jet.coeffs[1, 1] == pytest.approx(dxy, abs=1e-5)


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_product_commutes(a, b):
    p, q = _random_jet(a), _random_jet(b)
    assert np.allclose((p * q).coeffs, (q * p).coeffs, atol=1e-12)


@given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
def test_composition_is_associative(a, b, c):
    rng = np.random.default_rng(a + 7 * b + 13 * c)

    def rand_jet(base):
        coeffs = rng.normal(scale=0.5, size=(2, 4, 4))
        return Jet2(np.asarray(base, float), coeffs, 3)

    h = rand_jet([0.0, 0.0])
    g = rand_jet(h.value)
    f = rand_jet(g.value)
    left = f.compose(g).compose(h)
    right = f.compose(g.compose(h))
    assert left.max_abs_diff(right) < 1e-10


def test_order_above_three_rejected():
    with pytest.raises(UnsupportedOrderError):
        TaylorJet.constant(1.0, order=4)
    with pytest.raises(UnsupportedOrderError):
        StandardMap(0.5).jet([0.1, 0.1], order=4)


def test_twist_cubic_coefficients():
    # z exp(i c |z|^2) = z + i c z |z|^2 + O(|z|^5)
    c = 0.37
    jet = TwistMap(theta=0.0, c=c).jet([0.0, 0.0])
    X, Y = jet.coeffs
    assert X[2, 1] == pytest.approx(-c) and X[0, 3] == pytest.approx(-c)
    assert Y[3, 0] == pytest.approx(c) and Y[1, 2] == pytest.approx(c)
    assert X[3, 0] == 0 and Y[0, 3] == 0
    assert np.allclose(jet.linear, np.eye(2))


def test_twist_jet_matches_finite_differences():
    f = TwistMap(theta=2.0, c=0.2)
    jet = f.jet([0.0, 0.0])
    h = 1e-3
    g = lambda x, y: f.lift(np.array([x, y]))[1]
    # third derivative in x of the second component, central differences
    d3 = (g(2 * h, 0) - 2 * g(h, 0) + 2 * g(-h, 0) - g(-2 * h, 0)) / (2 * h**3)
    assert jet.coeffs[1, 3, 0] == pytest.approx(d3 / 6, abs=1e-5)


def test_linear_jet_roundtrip():
    M = np.array([[2.0, 1.0], [1.0, 1.0]])
    J = linear_jet(np.zeros(2), M)
    assert np.array_equal(J.linear, M)
    assert np.allclose(J(np.array([0.3, -0.1])), M @ [0.3, -0.1])
