"""Grid check of equivalence at 1: ``d <= mu((1-delta,1]) / nu((1-delta,1]) <= D``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlaw import MLaw

# spread D/d allowed on the grid, and the largest relative change of the
# ratio over the last decade of delta that still counts as settled
MAX_SPREAD = 1e6
MAX_DECADE_CHANGE = 0.10


@dataclass(frozen=True)
class EquivReport:
    mu: MLaw
    nu: MLaw
    epsilon: float
    delta_grid: np.ndarray
    log_mu: np.ndarray
    log_nu: np.ndarray
    passed: bool
    reason: str

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(invalid="ignore", over="ignore"):
            return np.exp(self.log_mu - self.log_nu)

    @property
    def d_hat(self) -> float:
        return float(np.min(self.ratio))

    @property
    def D_hat(self) -> float:
        return float(np.max(self.ratio))

    def rows(self):
        with np.errstate(under="ignore"):
            return list(zip(self.delta_grid, np.exp(self.log_mu), np.exp(self.log_nu), self.ratio))


def check_equivalence(mu: MLaw, nu: MLaw, epsilon: float, n_grid: int = 61) -> EquivReport:
    """Tail-mass ratios on a geometric grid from ``epsilon`` down to ``epsilon * 1e-6``.

    The verdict is a grid certificate: it passes when every ratio is positive
    and finite, the spread ``D/d`` stays below :data:`MAX_SPREAD`, and the ratio
    moves by less than :data:`MAX_DECADE_CHANGE` over the last decade of delta.
    ``reason`` names the test that decided it.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if n_grid < 2:
        raise ValueError("n_grid must be at least 2")
    grid = np.geomspace(epsilon, epsilon * 1e-6, n_grid)
    log_mu = np.array([mu.log_tail_mass(d) for d in grid])
    log_nu = np.array([nu.log_tail_mass(d) for d in grid])

    def report(passed, reason):
        return EquivReport(mu, nu, epsilon, grid, log_mu, log_nu, passed, reason)

    for name, vals in (("mu", log_mu), ("nu", log_nu)):
        zero = np.flatnonzero(~np.isfinite(vals))
        if zero.size:
            return report(False, f"{name} tail mass vanishes at delta={grid[zero[0]]:.17g}")
    log_ratio = log_mu - log_nu
    spread = float(log_ratio.max() - log_ratio.min())
    decade = grid >= grid[-1] * 10.0 * (1 - 1e-12)
    change = abs(math.expm1(min(abs(log_ratio[-1] - log_ratio[decade][-1]), 700.0)))
    failures = []
    if change >= MAX_DECADE_CHANGE:
        failures.append(f"ratio still moving: {change:.3g} relative change over the last decade")
    if spread > math.log(MAX_SPREAD):
        failures.append(f"spread D/d = {math.exp(min(spread, 700.0)):.3g} exceeds {MAX_SPREAD:g}")
    if failures:
        return report(False, "; ".join(failures))
    return report(True, f"bounded: D/d = {math.exp(spread):.6g}, last-decade change {change:.3g}")
