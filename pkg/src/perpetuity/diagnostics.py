"""Goodness-of-fit helpers for the samplers and the engine."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .mlaw import MLaw


def ks_statistic(samples, law: MLaw) -> float:
    """One-sample Kolmogorov-Smirnov distance between ``samples`` and ``law``.

    Ties are grouped and the lower jump of the empirical cdf is compared with
    the model cdf just below the tied value. This keeps the statistic honest
    for laws whose mass piles up on the last few doubles below 1, where many
    draws round to the same value.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    values, first = np.unique(x, return_index=True)
    last = np.append(first[1:], n)
    f_at = law.cdf_sorted(values)
    f_below = law.cdf_sorted(np.nextafter(values, -np.inf).clip(0.0, 1.0))
    d_plus = np.max(last / n - f_at)
    d_minus = np.max(f_below - first / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample critical value ``sqrt(-ln(alpha/2) / (2n))``."""
    return math.sqrt(-math.log(alpha / 2.0) / (2.0 * n))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and p-value."""
    res = stats.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue)


def ks_two_sample_critical(n: int, m: int, alpha: float = 0.01) -> float:
    return math.sqrt(-math.log(alpha / 2.0) * (n + m) / (2.0 * n * m))
