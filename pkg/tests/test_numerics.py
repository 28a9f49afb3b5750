import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perpetuity.chernoff import ExpLinear, Power
from perpetuity.numerics import (ConjugateQuery, LogQuadSpec, QuadratureError, RootBracketError,
                                 find_root, gk15_fixed, legendre, log_integrate)


def test_exponential_integral_matches_closed_form():
    got = log_integrate(lambda x: -x, LogQuadSpec(0.0, 1.0, 1e-13))
    assert got == pytest.approx(math.log1p(-math.exp(-1.0)), rel=1e-13)


def test_gaussian_mass():
    got = log_integrate(lambda x: -0.5 * x * x, LogQuadSpec(-12.0, 12.0, 1e-13))
    assert got == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-13)


def test_integrand_far_beyond_overflow():
    # ∫_0^1 exp(2000 x) dx = (e^2000 - 1)/2000
    got = log_integrate(lambda x: 2000.0 * x, LogQuadSpec(0.0, 1.0, 1e-12))
    assert got == pytest.approx(2000.0 - math.log(2000.0), rel=1e-14)


def test_endpoint_singularity():
    # ∫_0^1 x^{-1/2} dx = 2
    got = log_integrate(lambda x: -0.5 * np.log(x), LogQuadSpec(0.0, 1.0, 1e-10))
    assert got == pytest.approx(math.log(2.0), abs=1e-9)


def test_zero_integrand_is_minus_inf():
    assert log_integrate(lambda x: np.full_like(x, -np.inf), LogQuadSpec(0.0, 1.0)) == -math.inf


@pytest.mark.parametrize("kw", [dict(lower=1.0, upper=0.0), dict(lower=0.0, upper=math.inf),
                                dict(lower=0.0, upper=1.0, rel_tol=0.0),
                                dict(lower=0.0, upper=1.0, max_subdivisions=0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        LogQuadSpec(**kw)


def test_budget_exhaustion_raises():
    with pytest.raises(QuadratureError):
        log_integrate(lambda x: np.sin(1e4 * x) * 50.0,
                      LogQuadSpec(0.0, 1.0, 1e-14, max_subdivisions=3))


@given(st.floats(-400.0, 400.0).filter(lambda a: abs(a) > 1e-3))
def test_exponential_family_property(a):
    exact = float(mpmath.log((mpmath.exp(a) - 1) / a))
    got = log_integrate(lambda x: a * x, LogQuadSpec(0.0, 1.0, 1e-12))
    assert got == pytest.approx(exact, rel=1e-11, abs=1e-11)


@given(st.floats(0.1, 50.0), st.floats(0.5, 5.0))
def test_split_additivity(c, k):
    f = lambda x: -k * x + np.log1p(x)
    whole = log_integrate(f, LogQuadSpec(0.0, 2 * c, 1e-12))
    left = log_integrate(f, LogQuadSpec(0.0, c, 1e-12))
    right = log_integrate(f, LogQuadSpec(c, 2 * c, 1e-12))
    assert whole == pytest.approx(float(np.logaddexp(left, right)), abs=1e-10)


def test_gk15_fixed_exact_for_polynomials():
    got = gk15_fixed(lambda x: x ** 10, np.array([0.0, 1.0]), np.array([1.0, 3.0]))
    np.testing.assert_allclose(got, [1 / 11, (3 ** 11 - 1) / 11], rtol=1e-14)


def test_find_root_sqrt2():
    assert find_root(lambda x: x * x - 2, (0.0, 2.0), tol=1e-15) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_find_root_reversed_bracket_and_exact_endpoint():
    assert find_root(lambda x: x - 1, (3.0, 0.0)) == pytest.approx(1.0, abs=1e-9)
    assert find_root(lambda x: x, (0.0, 1.0)) == 0.0


def test_find_root_without_sign_change():
    with pytest.raises(RootBracketError):
        find_root(lambda x: x * x + 1, (-1.0, 1.0))


@given(st.floats(-100.0, 100.0))
def test_find_root_cubic(r):
    got = find_root(lambda x: (x - r) ** 3, (-200.0, 200.0), tol=1e-12)
    assert abs(got - r) <= 1e-10


class _NoClosed:
    """Strip a closed-form conjugate so the numeric path is exercised."""

    conjugate = None

    def __init__(self, phi):
        self._phi = phi
        self.convex_from = phi.convex_from
        self.value_at_zero = phi.value_at_zero

    def value(self, z):
        return self._phi.value(z)

    def log_derivative(self, z):
        return self._phi.log_derivative(z)


@pytest.mark.parametrize("r,B,x", [(2.0, 0.5, 3.0), (3.0, 2.0, 40.0), (1.5, 1.0, 7.0)])
def test_numeric_conjugate_matches_power_closed_form(r, B, x):
    phi = Power(r)
    closed = legendre(ConjugateQuery(phi, B, x))
    numeric = legendre(ConjugateQuery(_NoClosed(phi), B, x))
    assert numeric.value == pytest.approx(closed.value, rel=1e-9)
    assert numeric.argmax == pytest.approx(closed.argmax, rel=1e-6)


@pytest.mark.parametrize("b,B,x", [(0.5, 1.0, 100.0), (1.0, 2.0, 10.0), (2.0, 3.0, 1.0)])
def test_exp_linear_conjugate(b, B, x):
    # sup_z zx - B e^{bz}: interior optimum when x > Bb, else z = 0
    res = legendre(ConjugateQuery(ExpLinear(b), B, x))
    if x > B * b:
        exact = x / b * (math.log(x / (B * b)) - 1.0)
    else:
        exact = -B
    assert res.value == pytest.approx(exact, rel=1e-10, abs=1e-12)
    assert not res.truncated


@pytest.mark.parametrize("kw", [dict(B=0.0, x=1.0), dict(B=1.0, x=-1.0), dict(B=1.0, x=1.0, z_cap=0.0)])
def test_conjugate_query_validation(kw):
    with pytest.raises(ValueError):
        ConjugateQuery(Power(2.0), **kw)
