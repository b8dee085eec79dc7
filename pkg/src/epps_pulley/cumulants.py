"""Cumulants of the limit statistic ``T_inf = sum_j lambda_j N_j**2``.

``kappa_m = 2**(m-1) (m-1)! sum_j lambda_j**m``, available three ways:

* ``closed_form``: exact expressions for ``m = 1, 2`` from Gaussian moments;
* ``spectrum_sum``: power sums of computed eigenvalues (truncated);
* ``trace_quadrature``: traces of iterated kernels, no eigenvalue truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError
from .kernels import TuningBeta, as_beta, iterated_trace
from .quadrature import DEFAULT_NYSTROM_ORDER, gauss_hermite_rule

__all__ = [
    "CumulantSet",
    "cumulant_factor",
    "kappa1_closed",
    "kappa2_closed",
    "cumulants_closed",
    "cumulants_from_spectrum",
    "cumulants_from_traces",
    "compare_methods",
]

METHODS = ("closed_form", "spectrum_sum", "trace_quadrature")

# Taylor coefficients of kappa2 in x = beta**2, starting at x**6; radius 1/4
_KAPPA2_SERIES = (
    12.5, -175.0, 1499.53125, -10191.5625, 60364.5, -326056.5, 1647767.21484375,
    -7917915.5859375, 36581391.38671875, -163819489.5390625, 715499480.7584229,
    -3062613954.286377, 12897016374.801025, -53598258139.851074, 220380280895.3717,
    -898356728858.8544, 3636709178383.82, -14640242582664.559, 58675280294248.805,
    -234329552665710.38, 933229032486678.5, -3708536763261277.0, 1.47124274061286e16,
    -5.8291725911859416e16, 2.30733314687035e17, -9.126558815315986e17,
)
_KAPPA2_SERIES_BELOW = 0.07


def cumulant_factor(m: int) -> float:
    """``2**(m-1) (m-1)!``, the factor linking ``kappa_m`` to ``sum lambda**m``."""
    return 2.0 ** (m - 1) * math.factorial(m - 1)


@dataclass(frozen=True)
class CumulantSet:
    """First cumulants of ``T_inf`` and how they were obtained.

    ``kappa`` has four entries for the numeric methods; the closed form only
    knows two, and the missing ones are ``nan``.  ``truncation_note`` is an
    upper estimate of the omitted tail of ``sum lambda_j`` when the
    cumulants come from a finite eigenvalue list.
    """

    beta: TuningBeta
    kappa: tuple
    method: str
    truncation_note: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        # every eigenvalue is positive, so every available cumulant must be too
        bad = [m for m, k in enumerate(self.kappa, start=1) if math.isfinite(k) and k <= 0]
        if bad:
            raise ConsistencyError(f"non-positive cumulant(s) kappa_{bad} from {self.method}")

    @property
    def power_sums(self) -> tuple:
        """``sum_j lambda_j**m`` for ``m = 1..4``."""
        return tuple(k / cumulant_factor(m) for m, k in enumerate(self.kappa, start=1))

    @property
    def skewness(self) -> float:
        return self.kappa[2] / self.kappa[1] ** 1.5

    def is_complete(self) -> bool:
        return len(self.kappa) == 4 and all(math.isfinite(k) for k in self.kappa)


def kappa1_closed(beta) -> float:
    """Mean of ``T_inf``: ``1 - (1+2b**2)**-0.5 [1 + b**2/(1+2b**2) + 3b**4/(2(1+2b**2)**2)]``.

    This is ``int K(x, x) phi_beta(x) dx`` with the Gaussian moments of
    ``(1 + x**2 + x**4/2) exp(-x**2)`` written out.
    """
    b2 = as_beta(beta).value ** 2
    v = 1.0 + 2.0 * b2
    excess = b2 / v + 1.5 * b2 * b2 / (v * v)
    # 1 - bracket/sqrt(v) cancels for small beta: expand with expm1/log1p
    return -math.expm1(math.log1p(excess) - 0.5 * math.log1p(2.0 * b2))


def kappa2_closed(beta) -> float:
    """Variance of ``T_inf`` in closed form.

    The three terms cancel to ``O(beta**12)``; below ``beta**2 = 0.07`` the
    Taylor series in ``beta**2`` is used instead.
    """
    b = as_beta(beta).value
    b2 = b * b
    if b2 < _KAPPA2_SERIES_BELOW:
        acc = 0.0
        for coef in reversed(_KAPPA2_SERIES):
            acc = acc * b2 + coef
        return acc * b2**6
    b4 = b2 * b2
    b8 = b4 * b4
    u = 1.0 + 2.0 * b2
    w = 1.0 + 4.0 * b2 + 3.0 * b4
    t1 = 2.0 / math.sqrt(1.0 + 4.0 * b2)
    t2 = 2.0 / u * (1.0 + 2.0 * b4 / u**2 + 9.0 * b8 / (4.0 * u**4))
    t3 = 4.0 / math.sqrt(w) * (1.0 + 3.0 * b4 / (2.0 * w) + 3.0 * b8 / (2.0 * w * w))
    return math.fsum([t1, t2, -t3])


def cumulants_closed(beta) -> CumulantSet:
    beta = as_beta(beta)
    return CumulantSet(beta, (kappa1_closed(beta), kappa2_closed(beta), math.nan, math.nan), "closed_form")


def cumulants_from_spectrum(spec) -> CumulantSet:
    """Cumulants from the power sums of a computed spectrum.

    The tail estimate treats the omitted eigenvalues as geometric with the
    ratio of the last two computed ones, applied to each parity sector's
    last value.
    """
    ev = np.asarray(spec.eigenvalues, dtype=float)
    if ev.size < 20:
        raise ValueError(f"need at least 20 eigenvalues, got {ev.size}")
    kappa = tuple(
        cumulant_factor(m) * math.fsum(ev**m) for m in range(1, 5)
    )
    # eigenvalues alternate between sectors, so step two back for the ratio
    ratio = ev[-1] / ev[-3] if ev[-3] > 0 else 0.0
    tail = float((ev[-1] + ev[-2]) * ratio / (1.0 - ratio)) if 0 < ratio < 1 else math.inf
    return CumulantSet(spec.beta, kappa, "spectrum_sum", tail)


def cumulants_from_traces(beta, rule=None) -> CumulantSet:
    """Cumulants from discretized traces of the iterated kernels."""
    beta = as_beta(beta)
    if rule is None:
        rule = gauss_hermite_rule(DEFAULT_NYSTROM_ORDER, beta)
    if rule.order < 200:
        raise ValueError(f"rule order {rule.order} < 200")
    kappa = tuple(cumulant_factor(m) * iterated_trace(m, beta, rule) for m in range(1, 5))
    return CumulantSet(beta, kappa, "trace_quadrature")


def compare_methods(*sets: CumulantSet) -> list[dict]:
    """Side-by-side table of ``kappa_m`` by method with the largest relative spread."""
    rows = []
    for m in range(4):
        row = {"m": m + 1}
        vals = []
        for cs in sets:
            v = cs.kappa[m] if m < len(cs.kappa) else math.nan
            row[cs.method] = v
            if math.isfinite(v):
                vals.append(v)
        if len(vals) >= 2:
            ref = max(abs(v) for v in vals)
            row["discrepancy"] = (max(vals) - min(vals)) / ref if ref else 0.0
        else:
            row["discrepancy"] = math.nan
        rows.append(row)
    return rows
