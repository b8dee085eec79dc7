"""Finite-sample null distribution of the Epps-Pulley statistic by simulation.

Replications are split into fixed-size chunks.  Chunk ``i`` draws from a
Philox counter-based generator keyed by ``(seed, i)``, so results depend only
on ``(seed, reps, n, beta)`` and never on how chunks are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegenerateSample
from .kernels import TuningBeta, as_beta

__all__ = [
    "SimConfig",
    "statistic",
    "statistic_batch",
    "standard_normals",
    "simulate",
    "critical_values",
    "nearest_rank",
    "worker_count",
    "WORKERS_ENV",
]

WORKERS_ENV = "EPPS_PULLEY_WORKERS"
CHUNK_REPS = 1024
# pair differences held in memory per sub-batch
_PAIR_BUDGET = 2_000_000
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings for the null distribution of ``T_{n,beta}``."""

    n: int
    beta: TuningBeta
    reps: int = 100_000
    seed: int = 0
    alphas: tuple = (0.1, 0.05, 0.01)

    def __post_init__(self):
        object.__setattr__(self, "beta", as_beta(self.beta))
        for name in ("n", "reps", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ContractViolation(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.n < 2:
            raise ContractViolation(f"n must be >= 2, got {self.n}")
        if self.reps < 1:
            raise ContractViolation(f"reps must be >= 1, got {self.reps}")
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas or not all(0.0 < a < 1.0 for a in alphas):
            raise ContractViolation(f"alphas must lie in (0, 1), got {alphas}")
        object.__setattr__(self, "alphas", tuple(sorted(alphas, reverse=True)))


def _scaled_residuals(x):
    """``(x - mean) / s`` row-wise, with the 1/n variance."""
    x = np.asarray(x, dtype=float)
    centred = x - x.mean(axis=-1, keepdims=True)
    var = np.mean(centred * centred, axis=-1, keepdims=True)
    return centred, var


def statistic_batch(samples, beta) -> np.ndarray:
    """Epps-Pulley statistic for each row of a ``(reps, n)`` array.

    Raises
    ------
    DegenerateSample
        If any row has zero variance.
    """
    b2 = as_beta(beta).value ** 2
    centred, var = _scaled_residuals(np.atleast_2d(samples))
    if np.any(var <= 0):
        bad = np.flatnonzero(var[:, 0] <= 0)
        raise DegenerateSample(f"zero sample variance in rows {bad[:5].tolist()}")
    y = centred / np.sqrt(var)
    reps, n = y.shape
    iu, ju = np.triu_indices(n, 1)
    step = max(1, _PAIR_BUDGET // max(1, iu.size))
    pair = np.empty(reps)
    for start in range(0, reps, step):
        blk = y[start : start + step]
        d = blk[:, iu] - blk[:, ju]
        d *= d
        d *= -0.5 * b2
        np.exp(d, out=d)
        pair[start : start + step] = d.sum(axis=1)
    # diagonal terms contribute n, off-diagonal pairs twice
    double_sum = (n + 2.0 * pair) / n
    single = np.exp(-b2 * y * y / (2.0 * (1.0 + b2))).sum(axis=1)
    return double_sum - 2.0 / math.sqrt(1.0 + b2) * single + n / math.sqrt(1.0 + 2.0 * b2)


def statistic(sample, beta) -> float:
    """Epps-Pulley statistic ``T_{n,beta}`` of one sample (O(n**2))."""
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ContractViolation("sample must be one-dimensional with at least 2 values")
    return float(statistic_batch(x[None, :], beta)[0])


def standard_normals(bitgen: np.random.BitGenerator, count: int) -> np.ndarray:
    """``count`` N(0, 1) variates by Box-Muller from raw 64-bit outputs."""
    pairs = (count + 1) // 2
    raw = bitgen.random_raw(2 * pairs)
    # top 53 bits, offset by half an ulp: uniforms strictly inside (0, 1)
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u[:pairs]))
    theta = 2.0 * math.pi * u[pairs:]
    return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]


def _chunk_generator(seed: int, chunk: int) -> np.random.Philox:
    return np.random.Philox(key=[seed & _MASK64, chunk & _MASK64])


def _run_chunk(config: SimConfig, chunk: int, size: int) -> np.ndarray:
    bg = _chunk_generator(config.seed, chunk)
    x = standard_normals(bg, size * config.n).reshape(size, config.n)
    _, var = _scaled_residuals(x)
    bad = np.flatnonzero(var[:, 0] <= 0)
    if bad.size:
        # resample once from the continuing stream
        x[bad] = standard_normals(bg, bad.size * config.n).reshape(bad.size, config.n)
    return statistic_batch(x, config.beta)


def worker_count(default: int | None = None) -> int:
    """Thread count from ``EPPS_PULLEY_WORKERS``, else ``default`` or the CPU count."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ContractViolation(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if w < 1:
            raise ContractViolation(f"{WORKERS_ENV} must be >= 1, got {w}")
        return w
    return default if default is not None else (os.cpu_count() or 1)


def simulate(config: SimConfig, workers: int | None = None) -> np.ndarray:
    """All ``reps`` simulated statistics, in chunk order."""
    sizes = [min(CHUNK_REPS, config.reps - s) for s in range(0, config.reps, CHUNK_REPS)]
    workers = worker_count(workers)
    if workers == 1 or len(sizes) == 1:
        parts = [_run_chunk(config, i, s) for i, s in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _run_chunk(config, *a), enumerate(sizes)))
    return np.concatenate(parts)


def nearest_rank(values, alpha: float) -> float:
    """Order statistic ``x_(k)`` with ``k = ceil(reps (1 - alpha))``."""
    v = np.sort(np.asarray(values, dtype=float))
    # guard against 0.9 * 1e5 landing a hair above an integer
    k = math.ceil(v.size * (1.0 - alpha) - 1e-9)
    return float(v[min(max(k, 1), v.size) - 1])


def critical_values(config: SimConfig, workers: int | None = None) -> dict:
    """Empirical ``1 - alpha`` quantiles of ``T_{n,beta}`` under normality."""
    values = simulate(config, workers)
    return {a: nearest_rank(values, a) for a in config.alphas}
