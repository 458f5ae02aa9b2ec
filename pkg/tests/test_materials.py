import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from nanocasimir import materials as M
from nanocasimir.errors import DomainError

SI = M.PAPER_SILICON


def test_lorentz_static_endpoint():
    assert SI.static_permittivity() == 11.87
    assert SI.lorentz_part(0.0) == pytest.approx(11.87)
    # carriers excluded, the imaginary-axis permittivity approaches the static value
    assert SI.lorentz_part(1e10) == pytest.approx(11.87, rel=1e-9)


def test_high_frequency_limit():
    assert M.epsilon_i_xi(SI, 1e20) == pytest.approx(SI.eps_inf, rel=1e-6)


def test_drude_term_dominates_at_low_frequency():
    xi = 1e11
    expected = SI.lorentz_part(xi) + SI.omega_p**2 / (xi * (xi + SI.gamma))
    assert M.epsilon_i_xi(SI, xi) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        M.epsilon_i_xi(SI, 0.0)


def test_transport_oracle():
    t = M.PAPER_TRANSPORT
    m = t.effective_mass_ratio * sc.m_e
    wp = math.sqrt(t.carrier_density * sc.e**2 / (sc.epsilon_0 * m))
    gam = t.carrier_density * sc.e**2 * t.resistivity / m
    got = M.drude_params_from_transport(t)
    assert got[0] == pytest.approx(wp, rel=1e-8)
    assert got[1] == pytest.approx(gam, rel=1e-8)
    # close to the bundled fit parameters
    assert got[0] == pytest.approx(SI.omega_p, rel=0.01)
    assert got[1] == pytest.approx(SI.gamma, rel=0.01)


def test_perfect_conductor_and_vacuum():
    assert M.epsilon_i_xi(M.PERFECT_CONDUCTOR, 1e14) == math.inf
    assert M.epsilon_i_xi(M.VACUUM, 1e14) == 1.0
    assert M.fresnel_imaginary(None, 1e6, 1e14, perfect_conductor=True) == (-1.0, 1.0)


@pytest.mark.parametrize("bad", [
    dict(eps_inf=0.5),
    dict(eps_inf=2.0, eps_static=1.5),
    dict(eps_static=3.0, omega_0=0.0),
    dict(omega_p=-1.0),
])
def test_invalid_models(bad):
    with pytest.raises(DomainError):
        M.DielectricModel(**bad)


def test_material_dict_round_trip():
    m = M.material_from_dict(SI.to_dict())
    assert m == SI
    with pytest.raises(ValueError):
        M.material_from_dict({"eps_inf": 2.0, "colour": "red"})
    t = M.material_from_dict({"eps_inf": 1.035, "eps_static": 11.87, "omega_0": 6.6e15,
                              "transport": {"carrier_density": 2.2e25, "resistivity": 4.23e-5,
                                            "effective_mass_ratio": 0.34}})
    assert t.omega_p == pytest.approx(M.drude_params_from_transport(M.PAPER_TRANSPORT)[0])


@settings(max_examples=100, deadline=None)
@given(st.floats(1e11, 1e18), st.floats(0.0, 1.0))
def test_reflection_forms_agree(xi, t):
    # t = xi / (c kappa) maps to k_par = (xi/c) sqrt(1/t^2 - 1)
    if t < 1e-6:
        return
    k_par = xi / sc.c * math.sqrt(max(1 / t**2 - 1, 0.0))
    eps = M.epsilon_i_xi(SI, xi)
    a = M.fresnel_imaginary(eps, k_par, xi)
    b = M.reflection_from_ratio(SI, xi, t)
    np.testing.assert_allclose(a, [float(b[0]), float(b[1])], rtol=1e-9, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 1e4), st.floats(0.0, 1e8), st.floats(1e10, 1e17))
def test_reflection_bounds(eps, k_par, xi):
    r_te, r_tm = M.fresnel_imaginary(eps, k_par, xi)
    assert -1.0 <= r_te <= 0.0
    assert 0.0 <= r_tm <= 1.0
