import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from perpetuity import mlaw
from perpetuity.diagnostics import ks_critical, ks_statistic
from perpetuity.mlaw import (Bernoulli, Beta, DomainError, GenBeta, PointMass, ThinTail,
                             UnsupportedOperation, WeibullLike, parse_law)

CONTINUOUS = ["beta:a=1,b=2", "beta:a=2,b=3", "genbeta:b=4,eta=2", "genbeta:b=0.5,eta=1.5",
              "weibull:r=2", "weibull:r=3", "thintail"]


# ---------------------------------------------------------------- grammar

@pytest.mark.parametrize("text,expected", [
    ("beta:b=2", Beta(1.0, 2.0)),
    ("beta:a=2,b=3", Beta(2.0, 3.0)),
    ("genbeta:b=4,eta=2", GenBeta(4.0, 2.0)),
    ("weibull:r=2", WeibullLike(2.0)),
    ("thintail", ThinTail()),
    ("bernoulli:m=0.3", Bernoulli(0.3)),
    ("point:m=0.5", PointMass(0.5)),
    ("  beta:b=2 ", Beta(1.0, 2.0)),
])
def test_parse_law(text, expected):
    assert parse_law(text) == expected


@pytest.mark.parametrize("text", ["gamma:k=1", "beta:a=1", "beta:b=2,b=3", "beta:b=2,c=1",
                                  "beta:b=x", "weibull:r=1", "genbeta:b=-1,eta=2", "point:m=2",
                                  "thintail:k=1", "beta:b"])
def test_parse_law_rejects(text):
    with pytest.raises(ValueError):
        parse_law(text)


@pytest.mark.parametrize("text", CONTINUOUS + ["point:m=0.25", "bernoulli:m=0.5"])
def test_spec_round_trip(text):
    law = parse_law(text)
    assert parse_law(law.spec()) == law


# ------------------------------------------------------------------- beta

@given(st.floats(0.3, 6.0), st.floats(0.3, 6.0), st.floats(1e-6, 1 - 1e-6))
def test_beta_cdf_matches_scipy(a, b, t):
    assert Beta(a, b).cdf(t) == pytest.approx(stats.beta(a, b).cdf(t), rel=1e-10, abs=1e-300)


@given(st.floats(0.3, 6.0), st.floats(0.3, 6.0), st.floats(-30.0, -1e-3))
def test_beta_tail_mass_matches_scipy(a, b, log_delta):
    delta = math.exp(log_delta)
    exact = stats.beta(a, b).logsf(1 - delta)
    if not math.isfinite(exact) or 1 - delta == 1.0:
        return
    # scipy works on 1 - delta, which carries a relative error of eps/delta
    tol = 1e-9 + 4 * np.finfo(float).eps / delta * b
    assert Beta(a, b).log_tail_mass(delta) == pytest.approx(exact, rel=tol, abs=tol)


def test_beta_tail_beyond_double_resolution():
    # mu((1-d, 1]) = d^b exactly for beta(1, b)
    assert Beta(1.0, 2.0).log_tail_mass(1e-200) == pytest.approx(2 * math.log(1e-200), rel=1e-14)
    # beta(2, 3): ∫_{1-d}^1 12 t (1-t)^2 dt = 4 d^3 - 3 d^4
    d = mpmath.mpf("1e-30")
    exact = float(mpmath.log(4 * d ** 3 - 3 * d ** 4))
    assert Beta(2.0, 3.0).log_tail_mass(1e-30) == pytest.approx(exact, rel=1e-10)


@given(st.floats(0.5, 4.0), st.floats(0.5, 4.0), st.floats(1e-4, 1 - 1e-4))
def test_beta_inverse_round_trip(a, b, u):
    law = Beta(a, b)
    assert law.cdf(law.inv_cdf(u)) == pytest.approx(u, rel=1e-9)


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (2.0, 3.0), (0.5, 0.5)])
def test_beta_mean(a, b):
    assert Beta(a, b).mean == pytest.approx(a / (a + b), rel=1e-11)


# ---------------------------------------------------------------- genbeta

@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(0.01, 0.99))
def test_genbeta_inverse_identity(beta, eta, u):
    law = GenBeta(beta, eta)
    inner = law.inverse.log_gap_map(math.log1p(-u))
    assert -math.expm1(law.log_gap_map(inner)) == pytest.approx(u, abs=1e-12)


@given(st.floats(0.5, 4.0), st.floats(0.5, 2.0), st.floats(0.05, 0.95))
def test_genbeta_inverse_identity_plain(beta, eta, u):
    # well-conditioned corner: the intermediate point stays away from 1
    law = GenBeta(beta, eta)
    if law.inverse.log_gap_map(math.log1p(-u)) < -20:
        return
    assert float(law.F(law.inverse.F(u))) == pytest.approx(u, abs=1e-10)


def test_log_gap_map_agrees_with_formula():
    law = GenBeta(3.0, 0.7)
    s = np.linspace(0.01, 0.99, 9)
    np.testing.assert_allclose(-np.expm1(law.log_gap_map(np.log1p(-s))), law.F(s), rtol=1e-14)


def test_genbeta_with_unit_eta_is_beta():
    t = np.linspace(0.01, 0.99, 23)
    np.testing.assert_allclose(GenBeta(2.5, 1.0).cdf(t), Beta(1.0, 2.5).cdf(t), rtol=1e-13)


@given(st.floats(0.2, 8.0), st.floats(0.2, 4.0), st.floats(1e-6, 0.5))
def test_genbeta_tail_formula(beta, eta, delta):
    # mu((1-d, 1]) = exp(-beta (-ln d)^eta)
    assert GenBeta(beta, eta).log_tail_mass(delta) == pytest.approx(
        -beta * (-math.log(delta)) ** eta, rel=1e-13)


def test_genbeta_density_integrates_to_one():
    law = GenBeta(4.0, 2.0)
    mass = mpmath.quad(lambda t: law.density(float(t)), [1e-300, 0.5, 0.9, 0.99, 1 - 1e-9])
    assert float(mass) == pytest.approx(1.0, abs=1e-8)


# ---------------------------------------------------------------- weibull

def _weibull_inv_k(r):
    g = 1 / (r - 1)
    return mpmath.quad(lambda v: mpmath.exp(-v ** -g), [0, 0.1, 1]) / r


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0, 5.0])
def test_weibull_normalizer(r):
    assert WeibullLike(r).log_normalizer == pytest.approx(-float(mpmath.log(_weibull_inv_k(r))),
                                                          rel=1e-12)


def test_weibull_known_constant():
    assert math.exp(WeibullLike(2.0).log_normalizer) == pytest.approx(13.468420987430791, rel=1e-12)


@pytest.mark.parametrize("r,delta", [(2.0, 0.3), (2.0, 0.05), (3.0, 0.02)])
def test_weibull_tail_mass(r, delta):
    g = 1 / (r - 1)
    f = lambda t: t ** (r - 1) * mpmath.exp(-(1 - t ** r) ** -g)
    exact = mpmath.log(mpmath.quad(f, [1 - mpmath.mpf(delta), 1]) / _weibull_inv_k(r))
    assert WeibullLike(r).log_tail_mass(delta) == pytest.approx(float(exact), rel=1e-10)


@pytest.mark.parametrize("t", [1e-6, 0.2, 0.5, 0.8])
def test_weibull_cdf(t):
    r, g = 2.0, 1.0
    f = lambda s: s * mpmath.exp(-(1 - s * s) ** -g)
    exact = mpmath.quad(f, [0, t]) / _weibull_inv_k(r)
    assert WeibullLike(r).cdf(t) == pytest.approx(float(exact), rel=1e-10)


def test_weibull_inv_sf_deep():
    law = WeibullLike(2.0)
    for s in (1e-3, 1e-20, 1e-40):
        t = law.inv_sf(s)
        assert math.exp(law.log_tail_mass(1 - t)) == pytest.approx(s, rel=1e-6)


# --------------------------------------------------------------- thintail

def _thin_inv_k():
    f = lambda u: mpmath.exp(-(mpmath.ei(1 / u) - mpmath.ei(1)))
    return mpmath.quad(f, [0.02, 0.05, 0.2, 1])


def _thin_tail(delta):
    # v = 1/u: ∫_{1/delta}^inf exp(-(Ei(v) - Ei(1))) v^-2 dv, on the scale y e^-y
    y = 1 / mpmath.mpf(delta)
    scale = y * mpmath.exp(-y)
    f = lambda v: mpmath.exp(-(mpmath.ei(v) - mpmath.ei(1))) / v ** 2
    return mpmath.quad(f, [y + k * scale for k in (0, 1, 4, 16, 64)])


def test_thintail_normalizer():
    assert ThinTail().log_normalizer == pytest.approx(-float(mpmath.log(_thin_inv_k())), rel=1e-12)


@pytest.mark.parametrize("delta", [0.5, 0.2, 0.1, 0.05])
def test_thintail_tail_mass(delta):
    exact = mpmath.log(_thin_tail(delta) / _thin_inv_k())
    assert ThinTail().log_tail_mass(delta) == pytest.approx(float(exact), rel=1e-10)


def test_thintail_density_decreases():
    t = np.linspace(1e-6, 0.95, 400)
    assert np.all(np.diff(ThinTail().log_density(t)) < 0)


def test_thintail_tail_vanishes_below_resolution():
    # e^{1/delta} delta overflows the exponent long before delta reaches 1e-3
    assert ThinTail().log_tail_mass(1e-3) == -math.inf


# --------------------------------------------------------- all continuous

@pytest.mark.parametrize("text", CONTINUOUS)
def test_cdf_sorted_matches_cdf(text):
    law = parse_law(text)
    t = np.sort(np.concatenate([np.linspace(0, 1, 41), [1e-9, 1 - 1e-9]]))
    np.testing.assert_allclose(law.cdf_sorted(t), law.cdf(t), rtol=1e-9, atol=1e-14)


@pytest.mark.parametrize("text", CONTINUOUS)
def test_cdf_monotone_and_bounded(text):
    c = parse_law(text).cdf_sorted(np.linspace(0, 1, 2001))
    assert c[0] == 0.0 and c[-1] == 1.0
    assert np.all(np.diff(c) >= 0)


@pytest.mark.parametrize("text", CONTINUOUS)
def test_inverse_cdf_round_trip(text):
    law = parse_law(text)
    u = np.array([1e-9, 0.01, 0.3, 0.5, 0.7])
    np.testing.assert_allclose(law.cdf(law.inv_cdf(u)), u, rtol=1e-8)
    s = np.array([1e-12, 1e-4, 0.1])
    np.testing.assert_allclose([law.tail_mass(1 - x) for x in law.inv_sf(s)], s, rtol=1e-6)


@pytest.mark.parametrize("text", CONTINUOUS)
def test_from_uniform_tracks_inverse(text):
    # the sampler interpolates a table; its error in probability is tiny
    # next to anything a Monte Carlo run of realistic size can resolve
    law = parse_law(text)
    u = np.linspace(0.001, 0.999, 37)
    np.testing.assert_allclose(law.cdf(law.from_uniform(u)), u, rtol=0, atol=1e-7)
    assert np.all(np.diff(law.from_uniform(np.linspace(0, 1 - 1e-12, 5001))) >= 0)


@pytest.mark.parametrize("text", CONTINUOUS)
def test_sampler_passes_ks(text):
    law = parse_law(text)
    x = law.sample(np.random.default_rng(7), 20000)
    assert np.all((x >= 0) & (x <= 1))
    assert ks_statistic(x, law) < ks_critical(x.size)


@pytest.mark.parametrize("text", CONTINUOUS)
def test_log_expectation_of_constant(text):
    law = parse_law(text)
    assert law.log_expectation(lambda t, lg: np.zeros_like(t)) == pytest.approx(0.0, abs=1e-11)


@given(st.sampled_from(CONTINUOUS), st.floats(1e-9, 0.5), st.floats(1.0, 1e3))
def test_tail_mass_monotone(text, delta, k):
    law = parse_law(text)
    small = delta / k
    assert law.log_tail_mass(small) <= law.log_tail_mass(delta) + 1e-12


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(3).random(5000)
    law = Beta(1.0, 2.0)
    y = law.from_uniform(x)
    assert ks_statistic(y, law) == pytest.approx(stats.kstest(y, stats.beta(1, 2).cdf).statistic,
                                                 abs=1e-12)


# --------------------------------------------------------------- discrete

def test_point_mass():
    law = PointMass(0.5)
    assert law.cdf(0.49) == 0.0 and law.cdf(0.5) == 1.0
    assert law.log_tail_mass(0.5) == -math.inf
    assert law.log_tail_mass(0.5, closed=True) == 0.0
    assert law.mean == 0.5
    with pytest.raises(UnsupportedOperation):
        law.density(0.3)


def test_bernoulli():
    law = Bernoulli(0.3)
    assert law.cdf(0.0) == pytest.approx(0.7)
    assert law.tail_mass(1e-9) == pytest.approx(0.3)
    assert law.mean == pytest.approx(0.3)
    x = law.sample(np.random.default_rng(0), 100000)
    assert set(np.unique(x)) <= {0.0, 1.0}
    assert abs(x.mean() - 0.3) < 0.005


# ---------------------------------------------------------------- domains

def test_domain_errors():
    law = Beta(1.0, 2.0)
    with pytest.raises(DomainError):
        law.cdf(1.5)
    with pytest.raises(DomainError):
        law.inv_cdf(1.0)
    with pytest.raises(DomainError):
        law.tail_mass(0.0)
    with pytest.raises(DomainError):
        law.density(1.0)


def test_free_functions():
    assert mlaw.cdf("beta:b=2", 0.5) == pytest.approx(0.75)
    assert mlaw.inv_cdf("beta:b=2", 0.75) == pytest.approx(0.5)
    assert mlaw.density("beta:b=2", 0.5) == pytest.approx(1.0)
    assert mlaw.tail_mass("beta:b=2", 0.1) == pytest.approx(0.01)
    assert mlaw.sample("beta:b=2", np.random.default_rng(1), 5).shape == (5,)


@pytest.mark.parametrize("text", CONTINUOUS)
def test_density_is_normalised(text):
    from perpetuity.numerics import LogQuadSpec, log_integrate
    law = parse_law(text)
    with np.errstate(divide="ignore", over="ignore"):
        total = log_integrate(lambda t: law.log_density(np.clip(t, 1e-300, 1 - 1e-16)),
                              LogQuadSpec(0.0, 1.0, 1e-10))
    assert total == pytest.approx(0.0, abs=1e-6)
