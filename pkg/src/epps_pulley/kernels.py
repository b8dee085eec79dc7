"""Covariance kernels of the Epps-Pulley limit process.

The limiting Gaussian process has covariance

    K(s, t) = K0(s, t) - sum_j phi_j(s) phi_j(t),   K0(s, t) = exp(-(s - t)**2 / 2),

where the three rank-one terms remove the directions spanned by the
estimated location and scale.  Factoring ``exp(-(s**2 + t**2)/2)`` out of
both pieces gives

    K(s, t) = exp(-(s**2 + t**2)/2) * (exp(st) - 1 - st - (st)**2/2),

and the bracket is evaluated with a Taylor series near ``st = 0``.  That
keeps full relative accuracy where the naive difference cancels to zero,
which matters for small ``beta`` where the weight concentrates near 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

__all__ = [
    "TuningBeta",
    "as_beta",
    "weight_density",
    "kernel_k0",
    "kernel_k",
    "phi",
    "nystrom_matrix",
    "iterated_trace",
]

_SQRT2 = math.sqrt(2.0)
# |u| below this uses the series for exp(u) - 1 - u - u**2/2
_SERIES_CUTOFF = 0.5


@dataclass(frozen=True)
class TuningBeta:
    """Positive, finite tuning parameter of the weight density."""

    value: float

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
            raise ContractViolation(f"beta must be a real number, got {v!r}")
        v = float(v)
        if not math.isfinite(v) or v <= 0.0:
            raise ContractViolation(f"beta must be finite and > 0, got {v!r}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value


def as_beta(beta) -> TuningBeta:
    """Coerce a float or a :class:`TuningBeta` to a validated :class:`TuningBeta`."""
    if isinstance(beta, TuningBeta):
        return beta
    return TuningBeta(beta)


def weight_density(t, beta):
    """Density of N(0, beta**2) at ``t``."""
    b = as_beta(beta).value
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * (t / b) ** 2) / (b * math.sqrt(2.0 * math.pi))


def kernel_k0(s, t):
    """Gaussian kernel ``exp(-(s - t)**2 / 2)``; broadcasts over arrays."""
    d = np.subtract(s, t, dtype=float)
    return np.exp(-0.5 * d * d)


def _exp_tail3_small(u):
    """``exp(u) - 1 - u - u**2/2`` by its Taylor series, for ``|u| < 0.5``."""
    # u**3/6 * (1 + u/4 + u**2/20 + ...); 16 terms is below 1 ulp for |u| < 0.5
    acc = np.zeros_like(u)
    term = np.ones_like(u)
    for k in range(4, 20):
        acc += term
        term = term * u / k
    return u**3 / 6.0 * acc


def kernel_k(s, t):
    """Covariance kernel ``K(s, t)`` of the limit process; broadcasts over arrays.

    Equal to ``exp(-(s-t)**2/2) - (1 + st + (st)**2/2) * exp(-s**2/2 - t**2/2)``,
    evaluated by series where that difference would cancel.
    """
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    u = s * t
    g = np.exp(-0.5 * (s * s + t * t))
    small = np.abs(u) < _SERIES_CUTOFF
    out = np.empty_like(u)
    out[small] = g[small] * _exp_tail3_small(u[small])
    ub = u[~small]
    d = s[~small] - t[~small]
    out[~small] = np.exp(-0.5 * d * d) - (1.0 + ub + 0.5 * ub * ub) * g[~small]
    return out[()] if out.ndim == 0 else out


def phi(j: int, s):
    """Rank-one factors of the kernel split: ``K = K0 - sum_j phi(j, s) phi(j, t)``."""
    s = np.asarray(s, dtype=float)
    g = np.exp(-0.5 * s * s)
    if j == 1:
        out = s * s * g / _SQRT2
    elif j == 2:
        out = s * g
    elif j == 3:
        out = g
    else:
        raise ContractViolation(f"phi index must be 1, 2 or 3, got {j!r}")
    return out[()] if out.ndim == 0 else out


def nystrom_matrix(rule) -> np.ndarray:
    """Symmetrized Nystrom matrix ``sqrt(w_i w_j) K(x_i, x_j)`` for a quadrature rule."""
    x = np.asarray(rule.nodes)
    r = np.sqrt(np.asarray(rule.weights))
    m = kernel_k(x[:, None], x[None, :]) * r[:, None] * r[None, :]
    # exact symmetry: the Jacobi solver checks it
    return 0.5 * (m + m.T)


def iterated_trace(m: int, beta, rule) -> float:
    """Discretized trace of the ``m``-th iterated kernel.

    With ``M_ij = w_j K(x_i, x_j)`` this returns ``trace(M**m)``, which
    converges to ``sum_j lambda_j**m`` over the spectrum of the integral
    operator as the rule order grows.  The symmetrized matrix is used since
    it is similar to ``M``.
    """
    beta = as_beta(beta)
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ContractViolation(f"m must be a positive integer, got {m!r}")
    if rule.beta != beta:
        raise ContractViolation(
            f"quadrature rule was built for beta={rule.beta.value}, not {beta.value}"
        )
    b = nystrom_matrix(rule)
    m = int(m)
    if m == 1:
        return float(np.trace(b))
    # trace(B**m) = sum(P * Q) with P = B**p, Q = B**(m-p) both symmetric
    p = m // 2
    half = np.linalg.matrix_power(b, p)
    rest = half if m - p == p else half @ b
    return float(np.sum(half * rest))
