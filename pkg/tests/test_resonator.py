import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanocasimir import resonator as R
from nanocasimir.errors import DomainError

B = R.PAPER_BEAM


def test_beta_l_is_the_first_root():
    assert math.cos(R.BETA_L) * math.cosh(R.BETA_L) == pytest.approx(1.0, abs=1e-4)


def test_euler_bernoulli_oracle():
    inertia = B.thickness_z * B.width_y**3 / 12
    area = B.thickness_z * B.width_y
    f = R.BETA_L**2 / (2 * math.pi * B.length**2) * math.sqrt(B.youngs_modulus * inertia / (B.density * area))
    assert B.euler_bernoulli_frequency() == pytest.approx(f, rel=1e-12)


def test_mode_shape_boundary_conditions():
    x = np.array([0.0, B.length / 2, B.length])
    np.testing.assert_allclose(R.mode_shape(B, x), [0.0, 1.0, 0.0], atol=1e-9)
    # clamped: zero slope at the ends
    h = 1e-9 * B.length
    assert abs(R.mode_shape(B, h) / h) * B.length < 1e-5
    with pytest.raises(DomainError):
        R.mode_shape(B, -1e-6)


def test_layout_weights():
    lay = R.UnitLayout.centered(B)
    assert len(lay.centers) == 31
    assert np.mean(lay.weights) == pytest.approx(1.0)
    assert lay.total_weight == pytest.approx(31.0)
    assert lay.weights[15] == lay.weights.max()
    sq = R.UnitLayout.centered(B, rule="amplitude2")
    # squaring spreads the weights further
    assert np.ptp(sq.weights) > np.ptp(lay.weights)
    with pytest.raises(DomainError):
        R.UnitLayout.centered(B, n=60, pitch=2e-6)


def test_frequency_shift_round_trip():
    dw = R.freq_shift_from_gradient(2.3e-6, B.k_cal)
    assert dw == pytest.approx(2.3e-6 / 1.07e-6)
    assert R.gradient_from_freq_shift(dw, B.k_cal) == pytest.approx(2.3e-6)
    with pytest.raises(DomainError):
        R.freq_shift_from_gradient(1.0, 0.0)


def test_quadrature_slope_matches_finite_difference():
    h = 2 * math.pi * 0.01
    xp = R.x_quadrature(B, B.omega_R, omega_R=B.omega_R + h)
    xm = R.x_quadrature(B, B.omega_R, omega_R=B.omega_R - h)
    assert (xp - xm) / (2 * h) == pytest.approx(R.quadrature_slope(B), rel=1e-4)


def test_x_quadrature_range_guard():
    with pytest.raises(DomainError):
        R.x_quadrature(B, 1.02 * B.omega_R)
    # far off resonance the response keeps the sign of a downward resonance shift
    far = R.x_quadrature(B, 1.02 * B.omega_R, check_range=False)
    near = R.x_quadrature(B, B.omega_R, omega_R=B.omega_R - 2 * math.pi)
    assert far != 0 and np.sign(far) == np.sign(near)
    with pytest.raises(DomainError):
        R.infer_delta_omega(1.0, 0.0)


def test_in_phase_response_vanishes_on_resonance():
    assert R.x_quadrature(B, B.omega_R) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0))
def test_mode_symmetric(frac):
    x = frac * B.length
    assert R.mode_shape(B, x) == pytest.approx(R.mode_shape(B, B.length - x), abs=1e-12)
    assert -1e-12 <= R.mode_shape(B, x) <= 1.0 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-2 * math.pi, 2 * math.pi).filter(lambda v: abs(v) > 1e-3), st.floats(0.1, 10))
def test_lock_in_round_trip_small_shifts(dw, amp):
    x = R.x_quadrature(B, B.omega_R, drive_amp=amp, omega_R=B.omega_R + dw)
    assert R.infer_delta_omega(x, R.quadrature_slope(B, amp)) == pytest.approx(dw, rel=0.05)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 41), st.floats(0.5e-6, 2.5e-6))
def test_weights_mean_one(n, pitch):
    if (n - 1) * pitch >= B.length * 0.98:
        return
    lay = R.UnitLayout.centered(B, n, pitch)
    assert np.mean(lay.weights) == pytest.approx(1.0)
    np.testing.assert_allclose(lay.weights, lay.weights[::-1], rtol=1e-12)
