"""Chernoff-type upper bounds for the perpetuity tail.

If ``E exp(z R_{n-1}) <= exp(B Phi(z))`` then one step of ``R_n = q + M R_{n-1}``
preserves the bound as soon as

    e^{qz} E exp(B Phi(zM)) <= exp(B Phi(z)),

and then ``P(R >= x) <= exp(-Phi*_B(x))``. :func:`verify_iteration` checks the
inequality on a finite z-grid; the margin is evaluated as

    margin(z) = -qz - ln E exp(-B (Phi(z) - Phi(zM)))

which never forms ``exp(B Phi(z))`` and so stays finite when that overflows.
A passing report is a grid certificate only, not a proof for all ``z >= z0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlaw import MLaw
from .numerics import ConjugateQuery, legendre

E = math.e


def _log_omexp(log_a):
    """``ln(1 - e^{-a})`` from ``ln a`` (accurate when ``a`` underflows)."""
    log_a = np.asarray(log_a, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        a = np.exp(log_a)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = a < 1e-8
        big = np.where(a < 0.693, np.log(-np.expm1(-a)), np.log1p(-np.exp(-a)))
        return np.where(small, log_a - 0.5 * a, big)


def _log_one_minus_pow(k, log_gap):
    """``ln(1 - (1 - g)^k)`` from ``ln g``."""
    log_gap = np.asarray(log_gap, dtype=float)
    with np.errstate(under="ignore"):
        g = np.exp(log_gap)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = g < 1e-8
        direct = np.log(-np.expm1(k * np.log1p(-g)))
        return np.where(small, log_gap + math.log(k) + np.log1p(-0.5 * (k - 1.0) * g), direct)


class PhiFamily:
    """Increasing convex ``Phi`` on ``[convex_from, inf)``.

    ``log_drop(z, t, log_gap)`` returns ``ln(Phi(z) - Phi(z t))`` where
    ``log_gap = ln(1 - t)`` carries the distance to 1 at full precision.
    """

    convex_from = 0.0
    value_at_zero = 0.0
    conjugate = None

    def value(self, z):
        raise NotImplementedError

    def log_derivative(self, z):
        raise NotImplementedError

    def log_drop(self, z, t, log_gap):
        raise NotImplementedError


@dataclass(frozen=True)
class ExpLinear(PhiFamily):
    """``Phi(z) = e^{bz}``; note ``Phi(0) = 1``."""

    b: float
    value_at_zero = 1.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")

    def value(self, z):
        with np.errstate(over="ignore"):
            return np.exp(self.b * np.asarray(z, dtype=float))

    def log_derivative(self, z):
        return math.log(self.b) + self.b * z

    def log_drop(self, z, t, log_gap):
        return self.b * z + _log_omexp(math.log(self.b * z) + log_gap)

    def spec(self):
        return f"explinear:b={self.b!r}"


@dataclass(frozen=True)
class ExpPower(PhiFamily):
    """``Phi(z) = exp(b z^{1/eta})``; convex from ``((eta-1)/b)^eta`` when ``eta > 1``."""

    b: float
    eta: float
    value_at_zero = 1.0

    def __post_init__(self):
        if not (self.b > 0 and self.eta > 0):
            raise ValueError("b and eta must be positive")

    @property
    def convex_from(self):
        return ((self.eta - 1.0) / self.b) ** self.eta if self.eta > 1 else 0.0

    def value(self, z):
        with np.errstate(over="ignore"):
            return np.exp(self.b * np.asarray(z, dtype=float) ** (1.0 / self.eta))

    def log_derivative(self, z):
        k = 1.0 / self.eta
        return math.log(self.b * k) + (k - 1.0) * math.log(z) + self.b * z ** k

    def log_drop(self, z, t, log_gap):
        k = 1.0 / self.eta
        a = self.b * z ** k
        return a + _log_omexp(math.log(a) + _log_one_minus_pow(k, log_gap))

    def spec(self):
        return f"exppower:b={self.b!r},eta={self.eta!r}"


@dataclass(frozen=True)
class Power(PhiFamily):
    """``Phi(z) = z^r`` with the closed-form conjugate."""

    r: float

    def __post_init__(self):
        if not self.r > 1:
            raise ValueError("r must exceed 1")

    @property
    def r_star(self):
        return self.r / (self.r - 1.0)

    def value(self, z):
        return np.asarray(z, dtype=float) ** self.r

    def log_derivative(self, z):
        return math.log(self.r) + (self.r - 1.0) * math.log(z)

    def log_drop(self, z, t, log_gap):
        return self.r * math.log(z) + _log_one_minus_pow(self.r, log_gap)

    def conjugate(self, B, x):
        """``sup_z (zx - B z^r) = x^{r*} / (r* (B r)^{1/(r-1)})``."""
        rs = self.r_star
        value = x ** rs / (rs * (B * self.r) ** (1.0 / (self.r - 1.0)))
        argmax = (x / (B * self.r)) ** (1.0 / (self.r - 1.0))
        return value, argmax

    def spec(self):
        return f"power:r={self.r!r}"


@dataclass(frozen=True)
class ZLogZ(PhiFamily):
    """``Phi(z) = z ln z`` for ``z >= 1`` and 0 below."""

    convex_from = 1.0

    def value(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(z > 1, z * np.log(np.where(z > 1, z, 1.0)), 0.0)
        return out if out.ndim else float(out)

    def log_derivative(self, z):
        return math.log1p(math.log(z)) if z >= 1 else -math.inf

    def log_drop(self, z, t, log_gap):
        log_gap = np.asarray(log_gap, dtype=float)
        with np.errstate(under="ignore"):
            gap = np.exp(log_gap)
        ln_t = np.log1p(-gap)
        if z <= 1:
            return np.full_like(log_gap, -np.inf)
        ln_z = math.log(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            # -t ln t / gap, which tends to 1 as the gap closes
            c = np.where(gap > 1e-8, -np.exp(ln_t) * ln_t / gap, 1.0 - 0.5 * gap)
            both = math.log(z) + log_gap + np.log(ln_z + c)  # zt >= 1
            return np.where(ln_z + ln_t >= 0.0, both, math.log(z * ln_z))

    def conjugate(self, B, x):
        """``B exp(x/B - 1)`` for ``x >= B``; below that the maximiser is ``z = 1``."""
        if x >= B:
            a = x / B - 1.0
            if a > 700.0:
                # e^a overflows; the bound on ln P is below -1e300
                return math.inf, math.inf
            return B * math.exp(a), math.exp(a)
        return x, 1.0

    def spec(self):
        return "zlogz"


def parse_phi(text: str) -> PhiFamily:
    """``explinear:b=``, ``exppower:b=,eta=``, ``power:r=`` or ``zlogz``."""
    family, _, rest = text.strip().partition(":")
    kw = {}
    if rest:
        for item in rest.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"malformed parameter {item!r}")
            kw[key.strip()] = float(val)
    table = {"explinear": (ExpLinear, {"b"}), "exppower": (ExpPower, {"b", "eta"}),
             "power": (Power, {"r"}), "zlogz": (ZLogZ, set())}
    if family not in table:
        raise ValueError(f"unknown phi family {family!r}")
    cls, keys = table[family]
    if set(kw) != keys:
        raise ValueError(f"{family} takes parameters {sorted(keys)}, got {sorted(kw)}")
    return cls(**kw)


# ----------------------------------------------------------- iteration check


def iteration_margin(law: MLaw, q: float, phi: PhiFamily, B: float, z: float) -> float:
    """``B Phi(z) - [qz + ln E exp(B Phi(zM))]``, evaluated without overflow."""
    if not (z > 0 and B > 0):
        raise ValueError("z and B must be positive")

    def log_g(t, log_gap):
        with np.errstate(over="ignore"):
            return -B * np.exp(phi.log_drop(z, t, log_gap))

    return -q * z - law.log_expectation(log_g)


def iteration_rhs_log(phi: PhiFamily, B: float, z: float) -> float:
    """``B Phi(z)``, the log of the right-hand side (may be ``inf``)."""
    with np.errstate(over="ignore"):
        return float(B * phi.value(z))


def iteration_lhs_log(law: MLaw, q: float, phi: PhiFamily, B: float, z: float) -> float:
    """``qz + ln ∫ exp(B Phi(zt)) mu(dt)`` (``inf`` once ``B Phi(z)`` overflows)."""
    return iteration_rhs_log(phi, B, z) - iteration_margin(law, q, phi, B, z)


@dataclass(frozen=True)
class BoundReport:
    """Grid certificate for the iteration inequality."""

    phi: PhiFamily
    B: float
    q: float
    z_grid: np.ndarray
    margin: np.ndarray
    rhs_log: np.ndarray
    passed: bool
    kind: str = "grid certificate"

    @property
    def lhs_log(self):
        return self.rhs_log - self.margin

    @property
    def worst_z(self) -> float:
        return float(self.z_grid[int(np.argmin(self.margin))])

    def rows(self):
        return [(z, lhs, rhs, m) for z, lhs, rhs, m in
                zip(self.z_grid, self.lhs_log, self.rhs_log, self.margin)]


def z_grid(z0: float, n: int = 64, span: float = 100.0) -> np.ndarray:
    """Geometric grid of ``n`` points on ``[z0, span * z0]``."""
    if not z0 > 0:
        raise ValueError("z0 must be positive")
    return np.geomspace(z0, span * z0, n)


def verify_iteration(law: MLaw, q: float, phi: PhiFamily, B: float, zs) -> BoundReport:
    zs = np.asarray(zs, dtype=float)
    if zs.ndim != 1 or zs.size == 0 or np.any(zs <= 0) or np.any(np.diff(zs) <= 0):
        raise ValueError("z_grid must be ascending and positive")
    margin = np.array([iteration_margin(law, q, phi, B, z) for z in zs])
    rhs = np.array([iteration_rhs_log(phi, B, z) for z in zs])
    return BoundReport(phi, float(B), float(q), zs, margin, rhs, bool(np.all(margin >= 0)))


DEFAULT_B_GRID = np.geomspace(1.0, 1e3, 61)


def find_min_B(law: MLaw, q: float, phi: PhiFamily, zs, B_grid=DEFAULT_B_GRID):
    """Smallest grid ``B`` whose report passes, scanning the whole grid.

    Returns ``(B, report)`` or ``(None, report_at_largest_B)``.
    """
    B_grid = np.asarray(B_grid, dtype=float)
    if np.any(np.diff(B_grid) <= 0):
        raise ValueError("B_grid must be ascending")
    last = None
    for B in B_grid:
        last = verify_iteration(law, q, phi, float(B), zs)
        if last.passed:
            return float(B), last
    return None, last


# -------------------------------------------------------------- tail bounds


class TruncatedConjugate(ArithmeticError):
    pass


def chernoff_upper_log(phi: PhiFamily, B: float, x: float) -> float:
    """Upper bound ``-Phi*_B(x)`` on ``ln P(R >= x)``."""
    c = legendre(ConjugateQuery(phi, B, x))
    if c.truncated:
        raise TruncatedConjugate(f"conjugate maximiser reached the z cap at x={x!r}")
    return -c.value


def bernoulli_domination_margin(law: MLaw, s_grid) -> np.ndarray:
    """``ln(1 + m(e^s - 1)) - ln E e^{sM}`` with ``m = E M``."""
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0):
        raise ValueError("s must be positive")
    m = law.mean
    out = []
    for s in s_grid:
        dominating = math.log1p(m * math.expm1(s))
        out.append(dominating - law.log_expectation(lambda t, lg: s * t, rel_tol=1e-14))
    return np.array(out)


def geometric_mgf(m: float, q: float, z: float) -> float:
    """``(1-m) e^{qz} / (1 - m e^{qz})``, the mgf of ``q`` times a geometric count."""
    if not 0 < m < 1:
        raise ValueError("m must lie in (0, 1)")
    if m * math.exp(q * z) >= 1:
        raise ValueError("m e^{qz} >= 1: outside the radius of convergence")
    return (1 - m) * math.exp(q * z) / (1 - m * math.exp(q * z))
