"""Survival-path lower bounds and normalised tail curves.

Forcing the first ``ln(1-c)/ln(1-cq/x)`` multipliers to be at least
``1 - cq/x`` already pushes ``R`` above ``x``, which gives

    ln P(R >= x) >= ln(1-c) / ln(1 - cq/x) * ln P(M >= 1 - cq/x).

The free constant ``c`` is optimised numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chernoff
from .chernoff import BoundReport, ExpLinear, ExpPower, PhiFamily, Power, ZLogZ
from .mlaw import Beta, GenBeta, MLaw, ThinTail, WeibullLike, log_int_exp_neg_h_parts
from .numerics import find_root

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_C_GRID = np.geomspace(1e-3, 1.0 - 1e-3, 48)


@dataclass(frozen=True)
class LowerBound:
    value: float
    trivial: bool
    c: float


def lower_bound_log(law: MLaw, q: float, x: float, c: float) -> LowerBound:
    """Survival-path lower bound on ``ln P(R >= x)`` for one ``c``.

    ``trivial`` is set (and ``value = -inf``) when ``P(M >= 1 - cq/x) = 0``.
    """
    if not x > q:
        raise ValueError(f"need x > q, got x={x!r}, q={q!r}")
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    delta = c * q / x
    log_p = law.log_tail_mass(delta, closed=True)
    if log_p == -math.inf:
        return LowerBound(-math.inf, True, c)
    if log_p == 0.0:
        return LowerBound(0.0, False, c)
    steps = math.log1p(-c) / math.log1p(-delta)
    return LowerBound(steps * log_p, False, c)


def _golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def optimize_c(law: MLaw, q: float, x: float, c_grid=DEFAULT_C_GRID) -> LowerBound:
    """Best survival-path bound over ``c``.

    Grid argmax followed by golden-section refinement inside the two grid
    cells around it. Raises ``ValueError`` when every grid point is trivial.
    """
    c_grid = np.asarray(c_grid, dtype=float)
    vals = np.array([lower_bound_log(law, q, x, c).value for c in c_grid])
    if np.all(vals == -np.inf):
        raise ValueError(f"every survival-path bound is trivial at x={x!r}")
    i = int(np.argmax(vals))
    if c_grid.size == 1:
        return lower_bound_log(law, q, x, float(c_grid[0]))
    lo = c_grid[max(i - 1, 0)]
    hi = c_grid[min(i + 1, c_grid.size - 1)]
    c_star, v_star = _golden_max(lambda c: lower_bound_log(law, q, x, c).value, lo, hi)
    if v_star < vals[i]:
        c_star, v_star = float(c_grid[i]), float(vals[i])
    return LowerBound(float(v_star), False, float(c_star))


# ------------------------------------------------------------ Weibull constants


def c0_equation(c: float, r: float) -> float:
    """``1/(1-c) + r* ln(1-c)/c``, whose root maximises the lower constant."""
    rs = r / (r - 1.0)
    return 1.0 / (1.0 - c) + rs * math.log1p(-c) / c


def c0_root(r: float) -> float:
    if not r > 1:
        raise ValueError("r must exceed 1")
    return find_root(lambda c: c0_equation(c, r), (1e-12, 1.0 - 1e-12), tol=1e-14)


def weibull_lower_constant(r: float, c: float) -> float:
    """Limit of the lower bound over ``(x/q)^{r*}``: ``ln(1-c) / (c^{r*} r^{1/(r-1)})``."""
    rs = r / (r - 1.0)
    return math.log1p(-c) / (c ** rs * r ** (1.0 / (r - 1.0)))


def weibull_upper_constant(A: float, r: float) -> float:
    """Limit of the upper bound over ``(x/q)^{r*}`` for ``B = weibull_B(q, r, A)``."""
    return -A ** (-r / (r - 1.0))


def weibull_B(q: float, r: float, A: float = 1.5) -> float:
    """``B = A^r (q/r)^r (r-1)^{r-1}``; any ``A > 1`` certifies for large ``z``."""
    if not A > 1:
        raise ValueError("A must exceed 1")
    return A ** r * (q / r) ** r * (r - 1.0) ** (r - 1.0)


# --------------------------------------------------------------- thin tails


def hosp_ratio(y: float) -> float:
    """``y ln(∫_0^{1/y} e^{-h(u)} du) / e^y``, which tends to -1."""
    if not y >= 1:
        raise ValueError("y must be at least 1")
    log_big_h, rest = log_int_exp_neg_h_parts(1.0 / y)
    return -y * math.exp(log_big_h - y) + y * rest * math.exp(-y)


# ----------------------------------------------------------------- curves


@dataclass(frozen=True)
class Normalizer:
    """Tail-rate normaliser: ``XLOGX``, ``XLOGX_ETA``, ``POWER`` or ``EXP``."""

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in ("XLOGX", "XLOGX_ETA", "POWER", "EXP"):
            raise ValueError(f"unknown normalizer {self.kind!r}")
        if self.kind != "XLOGX" and self.param is None:
            raise ValueError(f"{self.kind} needs a parameter")

    def __call__(self, x: float, q: float) -> float:
        if self.kind == "XLOGX":
            return x * math.log(x)
        if self.kind == "XLOGX_ETA":
            return x * math.log(x) ** self.param
        if self.kind == "POWER":
            return (x / q) ** self.param
        return self.param * math.exp(x / self.param)

    def label(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param!r})"


def parse_normalizer(text: str) -> Normalizer:
    """``XLOGX``, ``XLOGX_ETA(eta)``, ``POWER(r_star)`` or ``EXP(B)``."""
    text = text.strip()
    if "(" in text:
        kind, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise ValueError(f"malformed normalizer {text!r}")
        return Normalizer(kind.strip().upper(), float(rest[:-1]))
    return Normalizer(text.upper())


@dataclass(frozen=True)
class BoundSetup:
    """Family-matched choice of ``Phi``, ``B`` (``None`` means search) and normaliser."""

    phi: PhiFamily
    B: float | None
    normalizer: Normalizer
    z0: float


def default_setup(law: MLaw, q: float) -> BoundSetup:
    if isinstance(law, Beta):
        return BoundSetup(ExpLinear(q / law.beta), None, Normalizer("XLOGX"), 20.0)
    if isinstance(law, GenBeta):
        # any b above (q/beta)^(1/eta) works; the limit constant is 1/b^eta
        b = 1.05 * (q / law.beta) ** (1.0 / law.eta)
        return BoundSetup(ExpPower(b, law.eta), None, Normalizer("XLOGX_ETA", law.eta), 20.0)
    if isinstance(law, WeibullLike):
        return BoundSetup(Power(law.r), weibull_B(q, law.r), Normalizer("POWER", law.r_star), 10.0)
    if isinstance(law, ThinTail):
        return BoundSetup(ZLogZ(), 2.0 * q, Normalizer("EXP", 2.0 * q), math.e)
    raise ValueError(f"no default bound setup for {law.spec()}")


@dataclass
class TailCurve:
    law: MLaw
    q: float
    normalizer: Normalizer
    x_grid: np.ndarray
    lower_log: np.ndarray
    upper_log: np.ndarray
    normalizer_value: np.ndarray
    c_star: np.ndarray
    empirical_log: np.ndarray | None = None
    n_exceed: np.ndarray | None = None
    report: BoundReport | None = field(default=None, repr=False)

    @property
    def lower_ratio(self):
        return self.lower_log / self.normalizer_value

    @property
    def upper_ratio(self):
        return self.upper_log / self.normalizer_value

    def columns(self):
        cols = ["x", "lower_log", "upper_log", "lower_ratio", "upper_ratio", "normalizer_value"]
        data = [self.x_grid, self.lower_log, self.upper_log, self.lower_ratio,
                self.upper_ratio, self.normalizer_value]
        if self.empirical_log is not None:
            cols += ["empirical_log", "n_exceed"]
            data += [self.empirical_log, self.n_exceed]
        return cols, data


def tail_ratio_curve(law: MLaw, q: float, x_grid, report: BoundReport,
                     normalizer: Normalizer, c_grid=DEFAULT_C_GRID,
                     tail=None) -> TailCurve:
    """Lower and upper log-tail bounds on ``x_grid`` and their normalised ratios.

    ``report`` must be a passing certificate; its ``phi`` and ``B`` give the
    upper bound. Points whose survival-path bound is trivial are NaN.
    ``tail`` is an optional :class:`engine.TailEstimate` on the same grid.
    """
    if report is None or not report.passed:
        raise ValueError("tail_ratio_curve needs a passing iteration certificate")
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= q):
        raise ValueError("x_grid must lie above q")
    lower, cs = [], []
    for x in x_grid:
        try:
            lb = optimize_c(law, q, x, c_grid)
            lower.append(lb.value)
            cs.append(lb.c)
        except ValueError:
            lower.append(np.nan)
            cs.append(np.nan)
    upper = np.array([chernoff.chernoff_upper_log(report.phi, report.B, x) for x in x_grid])
    norm = np.array([normalizer(x, q) for x in x_grid])
    curve = TailCurve(law, q, normalizer, x_grid, np.array(lower), upper, norm,
                      np.array(cs), report=report)
    if tail is not None:
        curve.empirical_log = np.asarray(tail.log_surv, dtype=float)
        curve.n_exceed = np.asarray(tail.n_exceed)
    return curve
