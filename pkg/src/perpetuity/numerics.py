"""Log-domain quadrature, bisection root finding and the convex conjugate.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class RootBracketError(ValueError):
    """The supplied bracket does not contain a sign change."""


# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point rule on [-1, 1]
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_LOG_WK = np.log(np.concatenate([_WGK[:-1], _WGK[::-1]]))
# Gauss nodes are the odd-indexed Kronrod nodes
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
_LOG_WG = np.log(np.concatenate([_WG[:-1], _WG[::-1]]))
# panel error estimates within this many ulps of the log value count as zero
ROUNDING_FACTOR = 16.0


@dataclass(frozen=True)
class LogQuadSpec:
    lower: float
    upper: float
    rel_tol: float = 1e-10
    max_subdivisions: int = 4000

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("integration limits must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


def _panels(ln_f, a, b):
    """Kronrod estimate and error estimate (both as logs) for each panel."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * NODES[None, :]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        vals = np.asarray(ln_f(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    if np.isnan(vals).any() or np.isposinf(vals).any():
        bad = x[np.isnan(vals) | np.isposinf(vals)][0]
        raise QuadratureError(f"log-integrand is not finite at t={bad!r}")
    log_h = np.log(h)
    log_k = log_h + logsumexp(vals + _LOG_WK, axis=1)
    log_g = log_h + logsumexp(vals[:, _GAUSS_IDX] + _LOG_WG, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.abs(np.expm1(log_g - log_k))
        # |G - K| below the rounding noise of the log values themselves is not signal
        noise = ROUNDING_FACTOR * np.finfo(float).eps * np.maximum(1.0, np.abs(log_k))
        rel = np.where(rel <= noise, 0.0, rel)
        log_err = np.where(np.isneginf(log_k), -np.inf, log_k + np.log(rel))
    return log_k, log_err


def log_integrate(ln_f: Callable[[np.ndarray], np.ndarray], spec: LogQuadSpec) -> float:
    """Return ``ln ∫ exp(ln_f(t)) dt`` over ``[spec.lower, spec.upper]``.

    ``ln_f`` is called with numpy arrays and must return arrays of the same
    shape. ``-inf`` is an acceptable value (zero integrand). Panels are only
    ever evaluated at interior nodes, so integrable singularities at the
    endpoints are fine. The result is returned as ``-inf`` when the integrand
    vanishes at every node of the initial partition. Relative accuracy is
    limited to about ``16 eps |ln I|`` per panel, the rounding noise in the
    log values.

    Raises
    ------
    QuadratureError
        If the global relative error estimate is still above ``rel_tol``
        after ``max_subdivisions`` panels, or the integrand returns NaN.
    """
    edges = np.linspace(spec.lower, spec.upper, 9)
    a, b = edges[:-1], edges[1:]
    log_k, log_err = _panels(ln_f, a, b)
    log_tol = math.log(spec.rel_tol)
    if np.isneginf(log_k).all():
        return -math.inf

    while True:
        total = float(logsumexp(log_k))
        err = float(logsumexp(log_err))
        if err <= log_tol + total:
            return total
        if np.isneginf(total):
            return total
        n = len(a)
        if n >= spec.max_subdivisions:
            raise QuadratureError(
                f"no convergence on [{spec.lower}, {spec.upper}] after {n} panels "
                f"(rel. error estimate {math.exp(err - total):.3g})"
            )
        # split every panel carrying more than its share of the allowed error
        share = log_tol + total - math.log(n)
        split = log_err > share
        split[np.argmax(log_err)] = True
        room = spec.max_subdivisions - n
        if split.sum() > room:
            order = np.argsort(-log_err)[:room]
            split[:] = False
            split[order] = True
        sa, sb = a[split], b[split]
        mid = 0.5 * (sa + sb)
        if np.any((mid <= sa) | (mid >= sb)):
            raise QuadratureError("panel width reached floating-point resolution")
        na = np.concatenate([sa, mid])
        nb = np.concatenate([mid, sb])
        nk, ne = _panels(ln_f, na, nb)
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        log_k = np.concatenate([log_k[keep], nk])
        log_err = np.concatenate([log_err[keep], ne])


def gk15_fixed(f: Callable[[np.ndarray], np.ndarray], a, b) -> np.ndarray:
    """Single 15-point Kronrod panel on each ``[a_i, b_i]`` (linear scale).

    Meant for short intervals over which ``f`` is analytic.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[..., None] + h[..., None] * NODES
    w = np.exp(_LOG_WK)
    return h * np.sum(f(x) * w, axis=-1)


def find_root(f: Callable[[float], float], bracket: tuple[float, float],
              tol: float = 1e-10, max_iter: int = 400) -> float:
    """Bisection on a sign-changing bracket.

    Stops once the bracket is narrower than ``tol`` (or cannot be split any
    further in floating point) and returns its midpoint.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (flo < 0.0) ^ (fhi < 0.0) or math.isnan(flo) or math.isnan(fhi):
        raise RootBracketError(f"no sign change on [{lo}, {hi}]: f={flo!r}, {fhi!r}")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# convex conjugate


@dataclass(frozen=True)
class ConjugateQuery:
    phi: object  # a chernoff.PhiFamily member
    B: float
    x: float
    z_cap: float = 1e4

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("B must be positive")
        if not self.x > 0:
            raise ValueError("x must be positive")
        if not self.z_cap > 0:
            raise ValueError("z_cap must be positive")


@dataclass(frozen=True)
class Conjugate:
    value: float
    argmax: float
    truncated: bool


Z_CAP_LIMIT = 1e8


def legendre(query: ConjugateQuery) -> Conjugate:
    """``sup_{0 < z <= z_cap} { z x - B Phi(z) }``.

    ``phi`` must expose ``value(z)``, ``log_derivative(z)``, ``convex_from``
    and ``value_at_zero``; it is convex on ``[convex_from, inf)`` and the
    objective is convex (so maximised at an end) below that point. The cap
    doubles up to ``1e8`` before the result is flagged as truncated.
    """
    phi, B, x = query.phi, query.B, query.x
    closed = getattr(phi, "conjugate", None)
    if closed is not None:
        value, argmax = closed(B, x)
        return Conjugate(value, argmax, False)

    def g(z):
        return z * x - B * float(phi.value(z))

    log_x_over_b = math.log(x) - math.log(B)

    def slope_sign(z):
        # sign of d/dz (z x - B Phi(z))
        return log_x_over_b - float(phi.log_derivative(z))

    candidates = [(-B * phi.value_at_zero, 0.0)]
    z_lo = float(phi.convex_from)
    if z_lo > 0:
        candidates.append((g(z_lo), z_lo))

    cap = max(query.z_cap, z_lo * 2.0, 1e-300)
    truncated = False
    while slope_sign(cap) > 0:
        if cap >= Z_CAP_LIMIT:
            truncated = True
            break
        cap = min(cap * 2.0, Z_CAP_LIMIT)
    if truncated:
        candidates.append((g(cap), cap))
    else:
        lo = z_lo
        if lo == 0.0 or slope_sign(lo) > 0:
            hi = cap
            for _ in range(2000):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi or hi - lo <= 1e-15 * hi:
                    break
                if slope_sign(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            z_star = 0.5 * (lo + hi)
            candidates.append((g(z_star), z_star))
    value, argmax = max(candidates, key=lambda c: c[0])
    return Conjugate(value, argmax, truncated)
