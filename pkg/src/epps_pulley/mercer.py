"""Mercer eigen-system of the Gaussian kernel ``K0`` under the N(0, beta**2) weight.

With ``a = 1/(4 beta**2)``, ``c = sqrt(1 + 4 beta**2) / (4 beta**2)`` and
``q = sqrt(1 + 4 beta**2) + 2 beta**2 + 1``:

* eigenvalues ``lam_k = sqrt(2/q) * B**k`` with ratio ``B = 2 beta**2 / q``;
* eigenfunctions ``psi_k(x) = h_k exp(-(c - a) x**2) H_k(sqrt(2c) x)`` with
  ``h_k**-2 = (1 + 4 beta**2)**(-1/4) 2**k k!``.

``H_k`` grows like ``2**k k!`` while ``h_k`` shrinks at the same rate, so
eigenfunctions are evaluated through the normalized recurrence
``Hn_k = H_k / sqrt(2**k k!)`` with the Gaussian factor folded into the
starting value and the running exponent tracked separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ContractViolation
from .kernels import TuningBeta, as_beta

__all__ = [
    "MercerBasis",
    "mercer_basis",
    "hermite_poly",
    "mercer_ratio",
    "mercer_eigenvalue",
    "mercer_eigenfunction",
    "mercer_constants",
    "DEFAULT_TRUNCATION",
]

DEFAULT_TRUNCATION = 150

_RESCALE_AT = 1e150


def _check_degree(k):
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise ContractViolation(f"degree must be a non-negative integer, got {k!r}")
    return int(k)


def hermite_poly(k: int, x):
    """Physicists' Hermite polynomial ``H_k(x)``.

    Three-term recurrence ``H_{k+1} = 2x H_k - 2k H_{k-1}``, run on mantissas
    with a separate power-of-two exponent so intermediate values never
    overflow; the result overflows to ``inf`` only if ``H_k(x)`` itself does.
    """
    k = _check_degree(k)
    x = np.asarray(x, dtype=float)
    h_prev = np.zeros_like(x)
    h = np.ones_like(x)
    expo = np.zeros(x.shape, dtype=np.int64)
    for j in range(k):
        h, h_prev = 2.0 * x * h - 2.0 * j * h_prev, h
        big = np.abs(h) > _RESCALE_AT
        if np.any(big):
            _, e = np.frexp(h)
            e = np.where(big, e, 0)
            h = np.ldexp(h, -e)
            h_prev = np.ldexp(h_prev, -e)
            expo = expo + e
    with np.errstate(over="ignore"):
        out = np.ldexp(h, expo) if np.any(expo) else h
    return out[()] if out.ndim == 0 else out


def mercer_constants(beta) -> dict:
    """Closed-form constants of the eigen-system for a given ``beta``."""
    b2 = as_beta(beta).value ** 2
    root = math.sqrt(1.0 + 4.0 * b2)
    q = root + 2.0 * b2 + 1.0
    a = 0.25 / b2
    c = root / (4.0 * b2)
    return {
        "a": a,
        "c": c,
        "lambda0": math.sqrt(2.0 / q),
        "ratio": 2.0 * b2 / q,
        # exp(-decay x**2) multiplies H_k(scale x)
        "decay": c - a,
        "scale": math.sqrt(2.0 * c),
        "log_h0": 0.125 * math.log1p(4.0 * b2),
    }


def mercer_ratio(beta) -> float:
    """Common ratio ``lam_{k+1} / lam_k`` of the geometric eigenvalue sequence."""
    return mercer_constants(beta)["ratio"]


def mercer_eigenvalue(k: int, beta) -> float:
    """``k``-th eigenvalue of ``K0`` under the N(0, beta**2) weight (log-space)."""
    k = _check_degree(k)
    cst = mercer_constants(beta)
    return math.exp(math.log(cst["lambda0"]) + k * math.log(cst["ratio"]))


def _normalized_hermite_table(kmax, y, log_start):
    """``exp(log_start) * H_k(y) / sqrt(2**k k!)`` for ``k = 0..kmax``.

    Returns an array of shape ``(kmax + 1,) + y.shape``.  ``log_start`` is the
    log of the Gaussian envelope, applied through the tracked exponent so the
    mantissa recurrence starts at 1.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty((kmax + 1,) + y.shape)
    h_prev = np.zeros_like(y)
    h = np.ones_like(y)
    logscale = np.asarray(log_start, dtype=float) * np.ones_like(y)
    with np.errstate(under="ignore", over="ignore"):
        out[0] = np.exp(logscale)
        for j in range(kmax):
            h, h_prev = (
                math.sqrt(2.0 / (j + 1)) * y * h - math.sqrt(j / (j + 1)) * h_prev,
                h,
            )
            mag = np.abs(h)
            big = mag > _RESCALE_AT
            if np.any(big):
                f = np.where(big, mag, 1.0)
                h = h / f
                h_prev = h_prev / f
                logscale = logscale + np.log(f)
            out[j + 1] = h * np.exp(logscale)
    return out


@dataclass(frozen=True, eq=False)
class MercerBasis:
    """Truncated eigen-system ``{lam_k, psi_k : k < count}`` of ``K0``.

    ``log_norms[k]`` is ``log h_k``.  Instances are immutable.
    """

    beta: TuningBeta
    count: int
    eigenvalues: np.ndarray = field(repr=False)
    log_norms: np.ndarray = field(repr=False)

    @property
    def ratio(self) -> float:
        return mercer_ratio(self.beta)

    def tail_sum(self) -> float:
        """Sum of the omitted eigenvalues ``lam_k``, ``k >= count``."""
        return float(self.eigenvalues[-1] * self.ratio / (1.0 - self.ratio))

    def evaluate(self, x, kmax=None) -> np.ndarray:
        """All eigenfunctions up to ``kmax`` (default ``count - 1``) at ``x``.

        Returns shape ``(kmax + 1,) + shape(x)``.
        """
        kmax = self.count - 1 if kmax is None else int(kmax)
        cst = mercer_constants(self.beta)
        x = np.asarray(x, dtype=float)
        log_start = cst["log_h0"] - cst["decay"] * x * x
        return _normalized_hermite_table(kmax, cst["scale"] * x, log_start)


def mercer_basis(beta, count: int = DEFAULT_TRUNCATION) -> MercerBasis:
    """Build the first ``count`` eigenpairs of ``K0`` for ``beta``."""
    beta = as_beta(beta)
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise ContractViolation(f"count must be a positive integer, got {count!r}")
    count = int(count)
    cst = mercer_constants(beta)
    k = np.arange(count)
    ev = np.exp(math.log(cst["lambda0"]) + k * math.log(cst["ratio"]))
    log_norms = cst["log_h0"] - 0.5 * (k * math.log(2.0) + gammaln(k + 1.0))
    ev.setflags(write=False)
    log_norms.setflags(write=False)
    return MercerBasis(beta, count, ev, log_norms)


def mercer_eigenfunction(k: int, beta, x):
    """Normalized eigenfunction ``psi_k`` of ``K0`` at ``x``.

    Orthonormal in ``L2(N(0, beta**2))``; ``psi_k`` has the parity of ``k``.
    """
    k = _check_degree(k)
    beta = as_beta(beta)
    cst = mercer_constants(beta)
    x = np.asarray(x, dtype=float)
    log_start = cst["log_h0"] - cst["decay"] * x * x
    out = _normalized_hermite_table(k, cst["scale"] * x, log_start)[k]
    return out[()] if out.ndim == 0 else out
