import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perpetuity.special import big_h, log_ei, log_ei_asymptotic, log_ei_increment, thin_h


@pytest.mark.parametrize("y", [1.0, 2.5, 10.0, 80.0, 699.0, 701.0, 1500.0, 1e5])
def test_log_ei_against_mpmath(y):
    assert float(log_ei(y)) == pytest.approx(float(mpmath.log(mpmath.ei(y))), rel=1e-14)


def test_asymptotic_series_near_switch():
    y = 700.0
    assert float(log_ei_asymptotic(y)) == pytest.approx(float(mpmath.log(mpmath.ei(y))), rel=1e-15)


@given(st.floats(1.0, 2000.0), st.floats(1e-12, 50.0))
def test_increment_against_mpmath(y, d):
    exact = mpmath.log(mpmath.ei(mpmath.mpf(y) + mpmath.mpf(d)) - mpmath.ei(y))
    assert float(log_ei_increment(y, d)) == pytest.approx(float(exact), rel=1e-12)


def test_increment_broadcasts():
    out = log_ei_increment(np.array([1.0, 5.0]), np.array([[0.5], [2.0]]))
    assert out.shape == (2, 2)


def test_thin_h_definition():
    for u in (0.9, 0.5, 0.1, 0.02):
        exact = mpmath.quad(lambda s: mpmath.exp(1 / s) / s, [u, 1])
        assert float(thin_h(u)) == pytest.approx(float(exact), rel=1e-12)


def test_h_vanishes_at_one_and_overflows_near_zero():
    assert thin_h(1.0) == 0.0
    assert big_h(1.0) == 0.0
    assert math.isinf(float(thin_h(1e-3)))
