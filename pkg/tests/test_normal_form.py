import json

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from symplab.errors import ClassificationError, InsufficientDataError, ResonanceError
from symplab.maps import StandardMap, SymplecticMap, TwistMap
from symplab.normal_form import (
    NormalFormData, birkhoff_a1, moser_stable_flag, rotation_number_fit, symplectic_frame,
)

ORIGIN = np.zeros(2)


class Conjugated(SymplecticMap):
    """``h^-1 o f o h`` for a linear area-one ``h`` (works on jets too)."""

    def __init__(self, f, H):
        super().__init__()
        self.f, self.H, self.Hi = f, np.asarray(H, float), np.linalg.inv(H)

    def _forward(self, x, y):
        H, Hi = self.H, self.Hi
        fx, fy = self.f._forward(H[0, 0] * x + H[0, 1] * y, H[1, 0] * x + H[1, 1] * y)
        return Hi[0, 0] * fx + Hi[0, 1] * fy, Hi[1, 0] * fx + Hi[1, 1] * fy


def _random_sl2(rng):
    a, b, c = rng.normal(size=3)
    a = a if abs(a) > 0.3 else 0.3 + abs(a)
    return np.array([[a, b], [c, (1 + b * c) / a]])


@pytest.mark.parametrize("theta", [2.0, 1.0, 0.7, -2.3])
@pytest.mark.parametrize("c", [0.1, 0.2, -0.3, 0.0])
def test_model_twist_calibration(theta, c):
    nf = birkhoff_a1(TwistMap(theta=theta, c=c), ORIGIN)
    assert nf.a1 == pytest.approx(c / (2 * np.pi), abs=1e-10)


def test_data_invariants():
    nf = birkhoff_a1(StandardMap(0.5), ORIGIN)
    assert abs(abs(nf.lambda_p) - 1) < 1e-8
    assert not any(nf.resonance_flags)
    assert np.linalg.det(nf.frame) == pytest.approx(1.0, abs=1e-8)
    assert nf.remainder_norm < 1e-8


def test_frame_rotates_linear_part():
    M = StandardMap(0.5).jacobian(ORIGIN)
    P, lam = symplectic_frame(M)
    R = np.linalg.inv(P) @ M @ P
    ang = np.angle(lam)
    assert np.allclose(R, [[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]], atol=1e-12)


def test_conjugation_invariance(rng):
    f = StandardMap(0.5)
    ref = birkhoff_a1(f, ORIGIN).a1
    for _ in range(10):
        g = Conjugated(f, _random_sl2(rng))
        assert birkhoff_a1(g, ORIGIN).a1 == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_iteration_covariance(k):
    c, theta = 0.2, 1.1
    nf1 = birkhoff_a1(TwistMap(theta=theta, c=c), ORIGIN)
    nfk = birkhoff_a1(TwistMap(theta=theta, c=c), ORIGIN, k=k)
    assert nfk.a1 == pytest.approx(k * nf1.a1, abs=1e-8)
    assert np.angle(nfk.lambda_p) == pytest.approx(np.angle(nf1.lambda_p**k), abs=1e-10)


def test_continuity_in_K():
    a = birkhoff_a1(StandardMap(0.5), ORIGIN).a1
    b = birkhoff_a1(StandardMap(0.5 + 1e-4), ORIGIN).a1
    assert abs(a - b) < 1e-2


@pytest.mark.parametrize("theta", [2 * np.pi / 3, np.pi / 2, np.pi / 2 + 1e-10])
def test_resonance_refused(theta):
    with pytest.raises(ResonanceError):
        birkhoff_a1(TwistMap(theta=theta, c=0.1), ORIGIN)


def test_hyperbolic_point_refused():
    with pytest.raises(ClassificationError):
        birkhoff_a1(StandardMap(0.5), [0.5, 0.0])


def test_rotation_fit_on_model_twist():
    fit = rotation_number_fit(TwistMap(theta=2.0, c=0.2), ORIGIN, np.linspace(0.05, 0.3, 6), 500)
    assert fit.slope == pytest.approx(0.2 / (2 * np.pi), rel=0.02)


def test_rotation_fit_rigid_rotation():
    fit = rotation_number_fit(TwistMap(theta=2.0, c=0.0), ORIGIN, np.linspace(0.05, 0.3, 6), 500)
    assert abs(fit.slope) < 1e-4


def test_rotation_fit_agrees_with_normal_form():
    f = StandardMap(0.5)
    fit = rotation_number_fit(f, ORIGIN, np.linspace(0.005, 0.05, 6), 1500)
    assert birkhoff_a1(f, ORIGIN).a1 == pytest.approx(fit.slope, rel=0.05)


def test_rotation_fit_drops_escaping_orbits():
    f = StandardMap(1.2)
    fit = rotation_number_fit(f, ORIGIN, [0.01, 0.02, 0.03, 0.45], 500)
    assert 0.45 in fit.dropped


def test_rotation_fit_needs_three_radii():
    with pytest.raises(InsufficientDataError):
        rotation_number_fit(TwistMap(theta=2.0, c=0.1), ORIGIN, [0.1, 0.2], 200)


def _nf(a1):
    return NormalFormData(np.exp(2j), a1, (False,) * 4, np.eye(2), 0.0)


def test_moser_flag_semantics():
    assert moser_stable_flag(_nf(0.1))
    assert not moser_stable_flag(_nf(0.0))
    assert not moser_stable_flag(_nf(1e-12), tol_a1=1e-6)


def test_json_roundtrip():
    data = json.loads(json.dumps(birkhoff_a1(StandardMap(0.5), ORIGIN).to_dict()))
    assert set(data) >= {"lambda_p", "a1", "resonance_flags", "frame", "remainder_norm"}


@given(st.floats(0.1, 3.9))
def test_remainder_cancelled(K):
    assume(min(abs(K - 2), abs(K - 3)) > 1e-2)
    nf = birkhoff_a1(StandardMap(K), ORIGIN)
    assert nf.remainder_norm < 1e-8
    assert abs(abs(nf.lambda_p) - 1) < 1e-8
