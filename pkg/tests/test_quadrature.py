import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanocasimir.errors import AccuracyError
from nanocasimir.quadrature import adaptive_gk


def test_exponential_tail():
    res = adaptive_gk(lambda x: np.exp(-x), [0.0, 1.0, 10.0, 60.0], rtol=1e-12)
    assert res.value == pytest.approx(1 - math.exp(-60), rel=1e-12)


def test_gamma_function_moments():
    # int_0^inf x^n e^-x dx = n!
    for n in range(1, 6):
        res = adaptive_gk(lambda x, n=n: x**n * np.exp(-x), [0, 1, 4, 16, 80], rtol=1e-11)
        assert res.value == pytest.approx(math.factorial(n), rel=1e-10)


def test_vector_valued_integrand():
    res = adaptive_gk(lambda x: np.stack([np.sin(x), np.cos(x)], axis=-1), [0, math.pi / 2], rtol=1e-12)
    np.testing.assert_allclose(res.value, [1.0, 1.0], rtol=1e-12)


def test_integrable_singularity_converges():
    res = adaptive_gk(lambda x: 1 / np.sqrt(x), [0.0, 1.0], rtol=1e-6, max_depth=60)
    assert res.value == pytest.approx(2.0, rel=1e-5)


def test_budget_exhaustion_keeps_estimate():
    with pytest.raises(AccuracyError) as info:
        adaptive_gk(lambda x: 1 / np.sqrt(x), [0.0, 1.0], rtol=1e-12, max_depth=3)
    assert info.value.estimate is not None
    assert info.value.error_bound is not None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20),
       st.floats(-3, 3), st.floats(0.1, 5))
def test_polynomials_integrate_exactly(coef, a, width):
    # Gauss-Kronrod 15 is exact up to degree 22
    b = a + width
    p = np.polynomial.Polynomial(coef)
    exact = p.integ()(b) - p.integ()(a)
    res = adaptive_gk(lambda x: p(x), [a, b], rtol=1e-13, atol=1e-12)
    assert res.value == pytest.approx(exact, rel=1e-10, abs=1e-9)
    assert res.n_intervals == 1
