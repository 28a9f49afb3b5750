"""Monte Carlo realisation of the perpetuity ``R = q + M R``.

Paths are grouped in fixed blocks of :data:`BLOCK` paths. Block ``k`` draws
from the stream ``SeedSequence(seed, spawn_key=(k,))``, so the output depends
only on ``(seed, n_paths, depth)`` and never on how blocks are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mlaw import MLaw

BLOCK = 4096
QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class PerpetuityConfig:
    q: float
    law: MLaw
    depth: int = 400
    n_paths: int = 1
    seed: int = 0
    r0: float = 0.0

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("q must be positive")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not self.r0 >= 0:
            raise ValueError("r0 must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def block_rng(seed: int, block: int) -> np.random.Generator:
    """The random stream owned by block ``block``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def iterate_path(config: PerpetuityConfig, rng: np.random.Generator) -> float:
    """``R_depth`` from ``R_0 = r0`` by ``R <- q + M R``."""
    m = config.law.from_uniform(rng.random(config.depth))
    r = config.r0
    for mk in m:
        r = config.q + mk * r
    return float(r)


def series_path(config: PerpetuityConfig, rng: np.random.Generator, n_terms: int) -> float:
    """``sum_{j=1}^{n_terms} q prod_{k<j} M_k``."""
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    m = config.law.from_uniform(rng.random(n_terms - 1))
    prods = np.concatenate([[1.0], np.cumprod(m)])
    return float(config.q * prods.sum())


def _run_block(config: PerpetuityConfig, block: int, rows: int) -> np.ndarray:
    rng = block_rng(config.seed, block)
    # row-major: each path's multipliers are consecutive draws of the stream
    m = config.law.from_uniform(rng.random((rows, config.depth)))
    r = np.full(rows, float(config.r0))
    for k in range(config.depth):
        r = config.q + m[:, k] * r
    return r


@dataclass
class Ensemble:
    samples: np.ndarray
    mean: float
    max: float
    quantiles: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "n_paths": int(self.samples.size),
            "mean": self.mean,
            "stderr": float(self.samples.std(ddof=1) / math.sqrt(self.samples.size))
            if self.samples.size > 1 else None,
            "max": self.max,
            "quantiles": {f"{k:g}": v for k, v in self.quantiles.items()},
        }


def ensemble(config: PerpetuityConfig, threads: int = 1) -> Ensemble:
    """Draw ``n_paths`` values of ``R_depth``.

    The samples are bit-identical for any ``threads``. A single path reduces
    to :func:`iterate_path` on the stream of block 0.
    """
    n_blocks = -(-config.n_paths // BLOCK)
    sizes = [min(BLOCK, config.n_paths - k * BLOCK) for k in range(n_blocks)]
    if threads <= 1 or n_blocks == 1:
        parts = [_run_block(config, k, n) for k, n in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda kn: _run_block(config, *kn), enumerate(sizes)))
    samples = np.concatenate(parts)
    qs = np.quantile(samples, QUANTILE_LEVELS)
    return Ensemble(samples, float(samples.mean()), float(samples.max()),
                    {lv: float(v) for lv, v in zip(QUANTILE_LEVELS, qs)})


@dataclass(frozen=True)
class TailEstimate:
    x_grid: np.ndarray
    log_surv: np.ndarray  # NaN where undefined
    defined: np.ndarray
    n_exceed: np.ndarray
    n_paths: int

    def log_stderr(self) -> np.ndarray:
        """Delta-method standard error of ``log_surv`` (NaN where undefined)."""
        p = self.n_exceed / self.n_paths
        with np.errstate(divide="ignore", invalid="ignore"):
            se = np.sqrt((1.0 - p) / (self.n_paths * p))
        return np.where(self.defined, se, np.nan)


def empirical_log_tail(samples, x_grid) -> TailEstimate:
    """``ln(#{samples >= x} / n)`` on an ascending grid."""
    samples = np.sort(np.asarray(samples, dtype=float))
    x_grid = np.asarray(x_grid, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample set")
    if np.any(np.diff(x_grid) < 0):
        raise ValueError("x_grid must be ascending")
    n = samples.size
    counts = n - np.searchsorted(samples, x_grid, side="left")
    defined = counts > 0
    with np.errstate(divide="ignore"):
        log_surv = np.where(defined, np.log(counts / n), np.nan)
    return TailEstimate(x_grid, log_surv, defined, counts, n)
