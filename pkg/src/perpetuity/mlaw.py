"""Multiplier laws on [0, 1].

Each law exposes its cdf, density, inverse cdf, sampler and the mass it puts
near 1. Deep tails are always handled through logarithms, so every law
offers ``log_tail_mass`` alongside ``tail_mass``.

Expectations ``E exp(G(M))`` are computed by :meth:`MLaw.log_expectation`,
which integrates in a coordinate adapted to each family:

* ``Beta``: ``-ln t`` on the lower half, ``-ln(1-t)`` on the upper half;
* ``GenBeta``: ``w = beta * (-ln(1-t))**eta``, which is standard exponential;
* ``WeibullLike``: ``w = 1 - t**r``;
* ``ThinTail``: the gap ``u = 1 - t``.

The callback receives both ``t`` and ``ln(1 - t)`` computed in that
coordinate, so that quantities depending on the distance to 1 keep full
precision even when ``t`` itself rounds to 1.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import betainc, betaincinv, betaln

from .numerics import ROUNDING_FACTOR, LogQuadSpec, QuadratureError, _panels, find_root, log_integrate
from .special import log_ei_increment, thin_h

LogG = Callable[[np.ndarray, np.ndarray], np.ndarray]

# knots per side of the tabulated inverse cdf
TABLE_KNOTS = 4096
# tables stop where the tail mass drops below exp(TABLE_LOG_FLOOR)
TABLE_LOG_FLOOR = -45.0
EXPECT_TOL = 1e-12


class DomainError(ValueError):
    pass


class UnsupportedOperation(TypeError):
    pass


def _log1mexp(a):
    """``ln(1 - e^a)`` for ``a <= 0``."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > -0.693, np.log(-np.expm1(a)), np.log1p(-np.exp(a)))
    return out if out.ndim else float(out)


def _check_t(t):
    arr = np.asarray(t, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError(f"t must lie in [0, 1], got {t!r}")
    return arr


def _check_delta(delta):
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta!r}")


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if np.any((arr <= 0) | (arr >= 1)) or np.any(np.isnan(arr)):
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    return arr


def _halfline(ln_f, v0, rate, log_bound, rel_tol, floor=-math.inf):
    """``ln ∫_{v0}^inf exp(ln_f(v)) dv`` given ``ln_f(v) <= log_bound - rate*v``.

    The upper limit doubles until the analytic tail bound is negligible.
    When even the bound on the whole integral lies below ``floor`` the
    integral is skipped and ``-inf`` returned.
    """
    if log_bound - rate * v0 - math.log(rate) < floor:
        return -math.inf
    span = 40.0 / rate
    hi = v0 + span
    total = log_integrate(ln_f, LogQuadSpec(v0, hi, rel_tol))
    while True:
        tail = log_bound - rate * hi - math.log(rate)
        slack = ROUNDING_FACTOR * np.finfo(float).eps * max(1.0, abs(total)) if total > -math.inf else 0.0
        if tail <= total + math.log(rel_tol) - 2.0 + slack:
            return total
        if span > 1e8 / rate:
            raise QuadratureError("half-line integral: tail bound never became negligible")
        new_hi = hi + span
        piece = log_integrate(ln_f, LogQuadSpec(hi, new_hi, rel_tol))
        total = float(np.logaddexp(total, piece))
        hi, span = new_hi, 2.0 * span


class MLaw:
    """Common interface; concrete laws are frozen dataclasses below."""

    continuous = True

    # -- distribution functions -------------------------------------------
    def log_cdf(self, t):
        raise NotImplementedError

    def log_tail_mass(self, delta, closed=False):
        """``ln mu((1-delta, 1])`` (``closed=True``: ``ln mu([1-delta, 1])``)."""
        raise NotImplementedError

    def cdf(self, t):
        t = _check_t(t)
        out = np.exp(np.vectorize(self.log_cdf, otypes=[float])(t))
        return out if out.ndim else float(out)

    def cdf_sorted(self, t) -> np.ndarray:
        """``cdf`` at an ascending array of points (faster for large arrays)."""
        return np.asarray(self.cdf(np.asarray(t, dtype=float)), dtype=float).reshape(np.shape(t))

    def tail_mass(self, delta, closed=False):
        _check_delta(delta)
        return math.exp(self.log_tail_mass(delta, closed))

    def log_density(self, t):
        raise UnsupportedOperation(f"{self.spec()} has no density")

    def density(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any((arr <= 0) | (arr >= 1)):
            raise DomainError("density is defined on the open interval (0, 1)")
        with np.errstate(over="ignore", under="ignore"):
            out = np.exp(self.log_density(arr))
        return out if np.ndim(out) else float(out)

    def inv_cdf(self, u):
        raise NotImplementedError

    def inv_sf(self, s):
        """Return ``t`` with ``mu((t, 1]) = s``; accurate for tiny ``s``."""
        raise NotImplementedError

    def from_uniform(self, u):
        """Inverse-transform a uniform array in ``[0, 1)`` into draws of ``M``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        out = self.from_uniform(np.asarray(u))
        return out if size is not None else float(out)

    def log_expectation(self, log_g: LogG, rel_tol: float = EXPECT_TOL) -> float:
        """``ln E exp(log_g(M, ln(1 - M)))`` for ``log_g`` nondecreasing in ``t``."""
        raise NotImplementedError

    @cached_property
    def mean(self) -> float:
        with np.errstate(divide="ignore"):
            return math.exp(self.log_expectation(lambda t, lg: np.log(t)))

    def spec(self) -> str:
        raise NotImplementedError


# ------------------------------------------------------------------ discrete


@dataclass(frozen=True)
class PointMass(MLaw):
    m: float
    continuous = False

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise DomainError("point mass location must lie in [0, 1]")

    def log_cdf(self, t):
        return 0.0 if t >= self.m else -math.inf

    def log_tail_mass(self, delta, closed=False):
        _check_delta(delta)
        inside = self.m >= 1.0 - delta if closed else self.m > 1.0 - delta
        return 0.0 if inside else -math.inf

    def inv_cdf(self, u):
        _check_u(u)
        return np.full_like(np.asarray(u, dtype=float), self.m)[()]

    def inv_sf(self, s):
        return self.inv_cdf(s)

    def from_uniform(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.m)

    def log_expectation(self, log_g, rel_tol=EXPECT_TOL):
        with np.errstate(divide="ignore"):
            lg = math.log1p(-self.m) if self.m < 1 else -math.inf
        return float(log_g(np.float64(self.m), np.float64(lg)))

    @cached_property
    def mean(self):
        return self.m

    def spec(self):
        return f"point:m={self.m!r}"


@dataclass(frozen=True)
class Bernoulli(MLaw):
    """``M = 1`` with probability ``m``, else ``0``."""

    m: float
    continuous = False

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise DomainError("Bernoulli parameter must lie in [0, 1]")

    def log_cdf(self, t):
        if t >= 1.0:
            return 0.0
        with np.errstate(divide="ignore"):
            return float(np.log1p(-self.m))

    def log_tail_mass(self, delta, closed=False):
        _check_delta(delta)
        if closed and delta >= 1.0:
            return 0.0
        with np.errstate(divide="ignore"):
            return float(np.log(self.m))

    def inv_cdf(self, u):
        u = _check_u(u)
        out = np.where(u <= 1.0 - self.m, 0.0, 1.0)
        return out if out.ndim else float(out)

    def inv_sf(self, s):
        s = _check_u(s)
        out = np.where(s < self.m, 1.0, 0.0)
        return out if out.ndim else float(out)

    def from_uniform(self, u):
        return np.where(np.asarray(u) < self.m, 1.0, 0.0)

    def log_expectation(self, log_g, rel_tol=EXPECT_TOL):
        with np.errstate(divide="ignore"):
            terms = [
                math.log1p(-self.m) + float(log_g(np.float64(0.0), np.float64(0.0))) if self.m < 1 else -math.inf,
                math.log(self.m) + float(log_g(np.float64(1.0), np.float64(-np.inf))) if self.m > 0 else -math.inf,
            ]
        return float(np.logaddexp(*terms))

    @cached_property
    def mean(self):
        return self.m

    def spec(self):
        return f"bernoulli:m={self.m!r}"


# --------------------------------------------------------------- closed forms


@dataclass(frozen=True)
class Beta(MLaw):
    """Beta(alpha, beta); closed forms when ``alpha == 1``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("beta parameters must be positive")

    @property
    def _lognorm(self):
        return float(betaln(self.alpha, self.beta))

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            a1 = np.where(self.alpha == 1, 0.0, (self.alpha - 1) * np.log(t))
            b1 = np.where(self.beta == 1, 0.0, (self.beta - 1) * np.log1p(-t))
        return a1 + b1 - self._lognorm

    def log_cdf(self, t):
        with np.errstate(divide="ignore"):
            if self.alpha == 1:
                return float(_log1mexp(self.beta * np.log1p(-t)))
            return float(np.log(betainc(self.alpha, self.beta, t)))

    def log_tail_mass(self, delta, closed=False):
        _check_delta(delta)
        if self.alpha == 1:
            return self.beta * math.log(delta)
        v = float(betainc(self.beta, self.alpha, delta))
        if v > 1e-300:
            return math.log(v)
        # underflow: integrate e^{-beta l} (1-e^{-l})^{alpha-1} over l > -ln delta
        lnf = lambda l: -self.beta * l + (self.alpha - 1) * np.log1p(-np.exp(-l))
        bound = max(0.0, (self.alpha - 1) * math.log1p(-delta)) if self.alpha < 1 else 0.0
        return _halfline(lnf, -math.log(delta), self.beta, bound, 1e-12) - self._lognorm

    def cdf_sorted(self, t):
        t = _check_t(t)
        if self.alpha == 1:
            with np.errstate(divide="ignore"):
                return -np.expm1(self.beta * np.log1p(-t))
        return betainc(self.alpha, self.beta, t)

    def inv_cdf(self, u):
        u = _check_u(u)
        if self.alpha == 1:
            out = -np.expm1(np.log1p(-u) / self.beta)
        else:
            out = np.where(u <= 0.5, betaincinv(self.alpha, self.beta, u),
                           1.0 - betaincinv(self.beta, self.alpha, 1.0 - u))
        return out if out.ndim else float(out)

    def inv_sf(self, s):
        s = _check_u(s)
        if self.alpha == 1:
            out = 1.0 - s ** (1.0 / self.beta)
        else:
            out = 1.0 - betaincinv(self.beta, self.alpha, s)
        return out if out.ndim else float(out)

    def from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        if self.alpha == 1 and self.beta == 1:
            return u.copy()
        if self.alpha == 1:
            return -np.expm1(np.log1p(-u) / self.beta)
        lo = betaincinv(self.alpha, self.beta, np.minimum(u, 0.5))
        hi = 1.0 - betaincinv(self.beta, self.alpha, np.maximum(1.0 - u, 0.0))
        return np.where(u <= 0.5, lo, hi)

    def log_expectation(self, log_g, rel_tol=EXPECT_TOL):
        a, b, ln2 = self.alpha, self.beta, math.log(2.0)

        def lower(tau):  # t = e^{-tau} <= 1/2
            t = np.exp(-tau)
            return log_g(t, np.log1p(-t)) - a * tau + (b - 1) * np.log1p(-t)

        def upper(ell):  # 1 - t = e^{-ell} <= 1/2
            t = -np.expm1(-ell)
            return log_g(t, -ell) - b * ell + (a - 1) * np.log1p(-np.exp(-ell))

        half = np.float64(0.5)
        g_half = float(log_g(half, np.log(half)))
        with np.errstate(divide="ignore"):
            g_one = float(log_g(np.float64(1.0), np.float64(-np.inf)))
        c_lo = abs(b - 1) * ln2
        c_hi = abs(a - 1) * ln2
        hi_part = _halfline(upper, ln2, b, g_one + c_hi, rel_tol)
        lo_part = _halfline(lower, ln2, a, g_half + c_lo, rel_tol,
                            floor=hi_part + math.log(rel_tol) - 5.0)
        return float(np.logaddexp(lo_part, hi_part)) - self._lognorm

    @cached_property
    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    def spec(self):
        return f"beta:a={self.alpha!r},b={self.beta!r}"


@dataclass(frozen=True)
class GenBeta(MLaw):
    """Generalised beta(1, beta): ``F(s) = 1 - exp(-beta (-ln(1-s))**eta)``.

    ``eta = 1`` is the beta(1, beta) law. The inverse of ``F_{beta,eta}`` is the
    function ``F_{beta**(-1/eta), 1/eta}``.
    """

    beta: float
    eta: float

    def __post_init__(self):
        if not (self.beta > 0 and self.eta > 0):
            raise DomainError("beta and eta must be positive")

    def F(self, s):
        """The distribution function as a plain formula (no domain check)."""
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            y = -np.log1p(-s)
        out = -np.expm1(-self.beta * y ** self.eta)
        return out if out.ndim else float(out)

    def log_gap_map(self, log_gap):
        """``ln(1 - F(s))`` as a function of ``ln(1 - s)``.

        Composing these maps avoids rounding the intermediate point, which
        lands within a few ulps of 1 whenever ``beta ** (-1/eta)`` is large.
        """
        log_gap = np.asarray(log_gap, dtype=float)
        out = -self.beta * (-log_gap) ** self.eta
        return out if out.ndim else float(out)

    @property
    def inverse(self) -> "GenBeta":
        return GenBeta(self.beta ** (-1.0 / self.eta), 1.0 / self.eta)

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        y = -np.log1p(-t)
        with np.errstate(divide="ignore"):
            return (math.log(self.beta * self.eta) + (self.eta - 1) * np.log(y)
                    - self.beta * y ** self.eta + y)

    def log_cdf(self, t):
        with np.errstate(divide="ignore"):
            y = -math.log1p(-t) if t < 1 else math.inf
            return float(_log1mexp(-self.beta * y ** self.eta))

    def log_tail_mass(self, delta, closed=False):
        _check_delta(delta)
        return -self.beta * (-math.log(delta)) ** self.eta

    def cdf_sorted(self, t):
        return np.asarray(self.F(_check_t(t)), dtype=float)

    def inv_cdf(self, u):
        _check_u(u)
        return self.inverse.F(u)

    def inv_sf(self, s):
        s = _check_u(s)
        gap = np.exp(-(-np.log(s) / self.beta) ** (1.0 / self.eta))
        out = 1.0 - gap
        return out if out.ndim else float(out)

    def from_uniform(self, u):
        return np.asarray(self.inverse.F(np.asarray(u, dtype=float)), dtype=float)

    def log_expectation(self, log_g, rel_tol=EXPECT_TOL):
        def lnf(w):
            y = (w / self.beta) ** (1.0 / self.eta)
            return log_g(-np.expm1(-y), -y) - w

        with np.errstate(divide="ignore"):
            g_one = float(log_g(np.float64(1.0), np.float64(-np.inf)))
        return _halfline(lnf, 0.0, 1.0, g_one, rel_tol)

    def spec(self):
        return f"genbeta:b={self.beta!r},eta={self.eta!r}"


# ------------------------------------------------------------ numeric laws


def _accumulate(ln_f, knots, log_first):
    """Running ``ln`` of ``exp(log_first) + ∫_{knots[0]}^{knots[i]} exp(ln_f)``."""
    log_k, log_err = _panels(ln_f, knots[:-1], knots[1:])
    if np.any(log_err - log_k > math.log(1e-10)):
        raise QuadratureError("inverse-cdf table: knot spacing too coarse")
    out = np.logaddexp.accumulate(np.concatenate([[log_first], log_k]))
    return out


class _NumericLaw(MLaw):
    """Laws whose cdf needs quadrature.

    Subclasses supply ``_log_cdf_low(t)`` (accurate for ``t <= 1/2``) and
    ``_log_sf_gap(g)`` (accurate for gap ``g = 1 - t <= 1/2``).
    """

    _ln_t_floor = math.log(1e-300)

    def log_cdf(self, t):
        if t <= 0:
            return -math.inf
        if t <= 0.5:
            return self._log_cdf_low(t)
        if t >= 1:
            return 0.0
        return float(_log1mexp(self._log_sf_gap(1.0 - t)))

    def log_tail_mass(self, delta, closed=False):
        _check_delta(delta)
        if delta <= 0.5:
            return self._log_sf_gap(delta)
        if delta >= 1:
            return 0.0
        return float(_log1mexp(self._log_cdf_low(1.0 - delta)))

    @cached_property
    def _log_cdf_half(self):
        return self._log_cdf_low(0.5)

    @cached_property
    def _table(self):
        """Monotone interpolants ``ln cdf -> ln t`` and ``ln sf -> ln gap``.

        Knots are geometric in ``t`` below 1/2 and in the gap above it. The
        table values are accumulated from one Kronrod panel per knot interval,
        anchored at the accurately computed value of the first knot.
        """
        target = TABLE_LOG_FLOOR
        x_lo = find_root(lambda x: self._log_cdf_low(math.exp(x)) - target,
                         (self._ln_t_floor, math.log(0.5)), tol=1e-6)
        x_gap = find_root(lambda x: self._log_sf_gap(math.exp(x)) - target,
                          (math.log(1e-300), math.log(0.5)), tol=1e-6)
        ln_t = np.linspace(x_lo, math.log(0.5), TABLE_KNOTS)
        ln_g = np.linspace(x_gap, math.log(0.5), TABLE_KNOTS)
        lc = _accumulate(lambda x: self.log_density(np.exp(x)) + x, ln_t, self._log_cdf_low(math.exp(x_lo)))
        ls = _accumulate(lambda x: self._log_density_gap(np.exp(x)) + x, ln_g, self._log_sf_gap(math.exp(x_gap)))
        return (PchipInterpolator(lc, ln_t, extrapolate=True),
                PchipInterpolator(ls, ln_g, extrapolate=True), lc, ls)

    def from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        low, high, lc, ls = self._table
        c_half = math.exp(self._log_cdf_half)
        with np.errstate(divide="ignore"):
            lu = np.clip(np.log(u), lc[0], lc[-1])
            ls_u = np.clip(np.log1p(-u), ls[0], ls[-1])
        t_low = np.exp(low(lu))
        t_high = -np.expm1(high(ls_u))
        out = np.where(u <= c_half, t_low, t_high)
        return np.where(u <= 0, 0.0, out)

    def cdf_sorted(self, t):
        """Running quadrature between consecutive points, anchored at the ends."""
        t = _check_t(t)
        if np.any(np.diff(t) < 0):
            raise ValueError("points must be ascending")
        out = np.empty_like(t)
        low = (t > 0) & (t <= 0.5)
        high = (t > 0.5) & (t < 1)
        out[t <= 0] = 0.0
        out[t >= 1] = 1.0
        if low.any():
            x = np.log(t[low])
            out[low] = np.exp(self._running(lambda v: self.log_density(np.exp(v)) + v, x,
                                            self._log_cdf_low))
        if high.any():
            x = np.log1p(-t[high])[::-1]
            ls = self._running(lambda v: self._log_density_gap(np.exp(v)) + v, x, self._log_sf_gap)
            out[high] = -np.expm1(ls)[::-1]
        return out

    @staticmethod
    def _running(ln_f, x, anchor):
        """``ln`` of ``anchor(e^{x_0}) + ∫_{x_0}^{x_i} e^{ln_f}`` along ascending ``x``.

        Values below ``-750`` are only accurate to the first few digits; the
        callers exponentiate them to exactly 0.
        """
        log_first = anchor(math.exp(x[0]))
        if x.size == 1:
            return np.array([log_first])
        a, b = x[:-1], x[1:]
        width = b > a
        log_k = np.full(a.shape, -np.inf)
        if width.any():
            k, err = _panels(ln_f, a[width], b[width])
            # a panel only matters relative to the running total it is added to
            running = np.logaddexp.accumulate(np.concatenate([[log_first], k]))[1:]
            eps = np.finfo(float).eps
            with np.errstate(invalid="ignore"):
                log_tol = np.log(np.maximum(1e-13, ROUNDING_FACTOR * eps * np.abs(running)))
                # below exp(-750) the returned probability underflows anyway
                coarse = np.flatnonzero((err - running > log_tol) & (running > -750.0))
            if coarse.size:
                # one vectorised pass over 32 equal pieces of every coarse panel
                aw, bw = a[width][coarse], b[width][coarse]
                edges = aw[:, None] + (bw - aw)[:, None] * np.linspace(0.0, 1.0, 33)
                sk, serr = _panels(ln_f, edges[:, :-1].ravel(), edges[:, 1:].ravel())
                sk, serr = sk.reshape(-1, 32), serr.reshape(-1, 32)
                with np.errstate(invalid="ignore", divide="ignore"):
                    k[coarse] = np.logaddexp.reduce(sk, axis=1)
                    still = np.logaddexp.reduce(serr, axis=1) - running[coarse] > log_tol[coarse]
                for j in coarse[still]:
                    k[j] = log_integrate(ln_f, LogQuadSpec(a[width][j], b[width][j], 1e-13))
            log_k[width] = k
        return np.logaddexp.accumulate(np.concatenate([[log_first], log_k]))

    def _invert(self, fn, target, guess):
        # bracket around the table guess, then bisect in log coordinates
        step = 1e-4
        lo, hi = guess - step, min(guess + step, math.log(0.5))
        for _ in range(80):
            if fn(lo) - target < 0:
                break
            lo -= step
            step *= 2
        step = 1e-4
        for _ in range(80):
            if fn(hi) - target > 0 or hi >= math.log(0.5):
                break
            hi = min(hi + step, math.log(0.5))
            step *= 2
        return find_root(lambda x: fn(x) - target, (lo, hi), tol=1e-14)

    def inv_cdf(self, u):
        u = _check_u(u)
        if u.ndim:
            return np.array([self.inv_cdf(float(v)) for v in u])
        u = float(u)
        if math.log(u) <= self._log_cdf_half:
            low = self._table[0]
            x = self._invert(lambda x: self._log_cdf_low(math.exp(x)), math.log(u), float(low(math.log(u))))
            return math.exp(x)
        return self.inv_sf(1.0 - u)

    def inv_sf(self, s):
        s = _check_u(s)
        if s.ndim:
            return np.array([self.inv_sf(float(v)) for v in s])
        s = float(s)
        if math.log1p(-s) <= self._log_cdf_half:
            return self.inv_cdf(1.0 - s)
        high = self._table[1]
        x = self._invert(lambda x: self._log_sf_gap(math.exp(x)), math.log(s), float(high(math.log(s))))
        return -math.expm1(x)


@dataclass(frozen=True)
class WeibullLike(_NumericLaw):
    """Density ``K_r t^{r-1} exp(-(1 - t^r)^{-1/(r-1)})`` on (0, 1), ``r > 1``.

    ``r`` is the exponent of the power ``Phi(z) = z**r`` that certifies the
    upper bound; the resulting perpetuity has ``ln P(R >= x)`` of order
    ``-(x/q)**r_star`` with ``1/r + 1/r_star = 1``. The same family written
    with ``r`` and ``r_star`` exchanged is an equivalent parameterisation.
    """

    r: float

    def __post_init__(self):
        if not self.r > 1:
            raise DomainError("WeibullLike needs r > 1")

    @property
    def gamma(self):
        return 1.0 / (self.r - 1.0)

    @property
    def r_star(self):
        return self.r / (self.r - 1.0)

    @cached_property
    def log_normalizer(self) -> float:
        """``ln K_r`` with ``1/K_r = (1/r) ∫_0^1 exp(-v^{-1/(r-1)}) dv``."""
        g = self.gamma
        inner = log_integrate(lambda v: -v ** (-g), LogQuadSpec(0.0, 1.0, 1e-13))
        return -(inner - math.log(self.r))

    @property
    def _ln_t_floor(self):
        return -600.0 / self.r

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            w = -np.expm1(self.r * np.log(t))
            return self.log_normalizer + (self.r - 1) * np.log(t) - w ** (-self.gamma)

    def _log_density_gap(self, gap):
        with np.errstate(divide="ignore", over="ignore"):
            lt = np.log1p(-gap)
            w = -np.expm1(self.r * lt)
            return self.log_normalizer + (self.r - 1) * lt - w ** (-self.gamma)

    def _log_cdf_low(self, t):
        s = math.exp(self.r * math.log(t))
        if s == 0.0:
            return -math.inf
        g = self.gamma
        inner = log_integrate(lambda x: -np.exp(-g * np.log1p(-x)), LogQuadSpec(0.0, s, 1e-13))
        return self.log_normalizer - math.log(self.r) + inner

    def _log_sf_gap(self, gap):
        # ∫_0^w e^{-v^-gamma} dv = (r-1) e^{-u0} ∫_0^inf e^{-y} (u0+y)^{-r} dy, u0 = w^-gamma
        w = -math.expm1(self.r * math.log1p(-gap))
        u0 = w ** (-self.gamma)
        if not math.isfinite(u0):
            return -math.inf
        r = self.r
        inner = log_integrate(lambda y: -y - r * np.log(u0 + y), LogQuadSpec(0.0, 80.0 + r, 1e-13))
        return self.log_normalizer - math.log(r) + math.log(r - 1) - u0 + inner

    def log_expectation(self, log_g, rel_tol=EXPECT_TOL):
        g, r, lnk = self.gamma, self.r, self.log_normalizer - math.log(self.r)

        def lnf(w):  # w = 1 - t^r
            ln_t = np.log1p(-w) / r
            with np.errstate(divide="ignore"):
                lg = np.log(-np.expm1(ln_t))
                return log_g(np.exp(ln_t), lg) - w ** (-g)

        return lnk + log_integrate(lnf, LogQuadSpec(0.0, 1.0, rel_tol))

    def spec(self):
        return f"weibull:r={self.r!r}"


def log_int_exp_neg_h_parts(delta: float, rel_tol: float = 1e-12) -> tuple[float, float]:
    """Split ``ln ∫_0^delta exp(-h(u)) du = -exp(log_H) + rest``.

    ``log_H = ln h(delta)`` stays finite when ``h(delta)`` itself overflows.
    Substituting ``v = 1/u`` and expanding around ``v = 1/delta`` on the
    natural scale ``1/H'(1/delta)`` keeps the remaining integrand of order one.
    """
    y = 1.0 / delta
    log_big_h = float(log_ei_increment(1.0, y - 1.0)) if y > 1 else -math.inf
    log_scale = math.log(y) - y
    if y > 700.0:
        # the scale is below 1e-300: the increment equals s to double
        # precision and the remaining integral is exactly ∫ e^{-s} ds / y^2
        return log_big_h, log_scale - 2.0 * math.log(y)

    def lnf(s):
        d = s * math.exp(log_scale)
        with np.errstate(over="ignore"):
            return -np.exp(log_ei_increment(y, d)) - 2.0 * np.log(y + d)

    # the increment grows at least linearly in s, so [0, 60] carries it all
    rest = log_scale + log_integrate(lnf, LogQuadSpec(0.0, 60.0, rel_tol))
    return log_big_h, rest


def log_int_exp_neg_h(delta: float, rel_tol: float = 1e-12) -> float:
    """``ln ∫_0^delta exp(-h(u)) du`` for ``0 < delta <= 1`` (``-inf`` on overflow)."""
    log_big_h, rest = log_int_exp_neg_h_parts(delta, rel_tol)
    with np.errstate(over="ignore"):
        return -math.exp(log_big_h) + rest if log_big_h < 709.0 else -math.inf


@dataclass(frozen=True)
class ThinTail(_NumericLaw):
    """Density ``K exp(-h(1 - t))`` with ``h(u) = ∫_u^1 e^{1/s}/s ds``.

    Decreasing from ``K`` at ``t = 0`` to 0 at ``t = 1``; the mass within
    ``delta`` of 1 decays like ``exp(-e^{1/delta} delta)``.
    """

    @cached_property
    def log_normalizer(self) -> float:
        """``ln K`` with ``1/K = ∫_0^1 exp(-h(u)) du``."""
        return -log_integrate(lambda u: -thin_h(u), LogQuadSpec(0.0, 1.0, 1e-13))

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return self.log_normalizer - thin_h(1.0 - t)

    def _log_density_gap(self, gap):
        with np.errstate(over="ignore"):
            return self.log_normalizer - thin_h(gap)

    def _log_cdf_low(self, t):
        inner = log_integrate(lambda s: -thin_h(1.0 - s), LogQuadSpec(0.0, t, 1e-13))
        return self.log_normalizer + inner

    def _log_sf_gap(self, gap):
        return self.log_normalizer + log_int_exp_neg_h(gap, 1e-13)

    def log_expectation(self, log_g, rel_tol=EXPECT_TOL):
        def lnf(u):
            with np.errstate(divide="ignore", over="ignore"):
                return log_g(1.0 - u, np.log(u)) - thin_h(u)

        return self.log_normalizer + log_integrate(lnf, LogQuadSpec(0.0, 1.0, rel_tol))

    def spec(self):
        return "thintail"


# ------------------------------------------------------------------ parsing

_GRAMMAR = {
    "beta": (Beta, {"a": "alpha", "b": "beta"}),
    "genbeta": (GenBeta, {"b": "beta", "eta": "eta"}),
    "weibull": (WeibullLike, {"r": "r"}),
    "thintail": (ThinTail, {}),
    "bernoulli": (Bernoulli, {"m": "m"}),
    "point": (PointMass, {"m": "m"}),
}


def parse_law(text: str) -> MLaw:
    """Parse ``family[:key=value,...]``, e.g. ``genbeta:b=4,eta=2``.

    ``beta`` accepts ``a`` (default 1) and ``b``; every other key is required.
    """
    text = text.strip()
    family, _, rest = text.partition(":")
    if family not in _GRAMMAR:
        raise ValueError(f"unknown law family {family!r}")
    cls, keys = _GRAMMAR[family]
    kwargs = {}
    if rest:
        for item in rest.split(","):
            m = re.fullmatch(r"\s*(\w+)\s*=\s*([^,\s]+)\s*", item)
            if not m:
                raise ValueError(f"malformed parameter {item!r} in {text!r}")
            key, val = m.groups()
            if key not in keys:
                raise ValueError(f"unknown key {key!r} for {family}")
            if keys[key] in kwargs:
                raise ValueError(f"duplicate key {key!r}")
            kwargs[keys[key]] = float(val)
    if family == "beta":
        kwargs.setdefault("alpha", 1.0)
    missing = set(keys.values()) - set(kwargs)
    if missing:
        raise ValueError(f"missing parameter(s) {sorted(missing)} for {family}")
    return cls(**kwargs)


# free functions; ``law`` may be an MLaw or a spec string


def _as_law(law) -> MLaw:
    return parse_law(law) if isinstance(law, str) else law


def cdf(law, t):
    return _as_law(law).cdf(t)


def inv_cdf(law, u):
    return _as_law(law).inv_cdf(u)


def density(law, t):
    return _as_law(law).density(t)


def sample(law, rng: np.random.Generator, size=None):
    return _as_law(law).sample(rng, size)


def tail_mass(law, delta: float) -> float:
    return _as_law(law).tail_mass(delta)
