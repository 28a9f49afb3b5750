"""Exponential-integral pieces behind the thin-tail multiplier law.

The law's exponent is ``h(u) = ∫_u^1 e^{1/s}/s ds = ∫_1^{1/u} e^v/v dv``,
i.e. ``Ei(1/u) - Ei(1)``. Everything is returned on a log scale because
``h`` itself overflows once ``1/u`` passes roughly 716.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expi

from .numerics import NODES, _LOG_WK

_W15 = np.exp(_LOG_WK)
# Ei overflows a little above 709; switch to the asymptotic series before that
EI_SWITCH = 700.0


def log_ei_asymptotic(y):
    """``ln Ei(y)`` from ``e^y/y * sum_k k!/y^k``, cut where terms stop shrinking."""
    y = np.asarray(y, dtype=float)
    term = np.ones_like(y)
    total = np.ones_like(y)
    for k in range(1, 60):
        nxt = term * k / y
        grow = nxt >= term
        nxt = np.where(grow, 0.0, nxt)
        term = nxt
        total = total + term
        if np.all(term < 1e-17 * total):
            break
    return y - np.log(y) + np.log(total)


def log_ei(y):
    """``ln Ei(y)`` for ``y >= 1``."""
    y = np.asarray(y, dtype=float)
    small = y <= EI_SWITCH
    with np.errstate(over="ignore", invalid="ignore"):
        direct = np.log(expi(np.where(small, y, 1.0)))
        asym = log_ei_asymptotic(np.where(small, EI_SWITCH + 1.0, y))
    return np.where(small, direct, asym)


def log_ei_increment(y, d):
    """``ln ∫_y^{y+d} e^v/v dv`` for ``y >= 1``, ``d >= 0`` (broadcasting).

    Short increments go through one Kronrod panel on ``e^v/(y+v)`` so that
    there is no cancellation between two large ``Ei`` values.
    """
    y, d = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(d, dtype=float))
    short = d <= 1.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ds = np.where(short, d, 0.0)
        v = 0.5 * ds[..., None] * (NODES + 1.0)
        panel = 0.5 * ds * np.sum(np.exp(v) / (y[..., None] + v) * _W15, axis=-1)
        near = y + np.log(panel)

        hi = log_ei(np.where(short, 2.0, y + d))
        lo = log_ei(np.where(short, 1.0, y))
        far = hi + np.log(-np.expm1(lo - hi))
    out = np.where(short, near, far)
    return out if out.ndim else float(out)


def big_h(y):
    """``H(y) = ∫_1^y e^v/v dv`` (may be ``inf``)."""
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(log_ei_increment(1.0, y - 1.0))
    return out if np.ndim(out) else float(out)


def thin_h(u):
    """``h(u) = ∫_u^1 e^{1/s}/s ds`` for ``0 < u <= 1``."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return big_h(1.0 / u)
