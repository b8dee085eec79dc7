"""Invariant checks shared by the ``verify`` command and the test suite.

Each check returns a :class:`Check`; ``warning`` checks are reported but do
not fail the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cumulants import cumulants_closed, cumulants_from_traces
from .kernels import as_beta, weight_density
from .mercer import mercer_basis, mercer_constants
from .montecarlo import statistic_batch
from .pearson import pearson_fit
from .quadrature import gauss_hermite_rule
from .spectrum import _quadrature_coefficients, coefficients, find_spectrum, nystrom_spectrum

__all__ = [
    "Check",
    "orthonormality_error",
    "eigen_relation_error",
    "parity_zero_error",
    "parseval_errors",
    "run_checks",
]

# below this fraction of the top eigenvalue the order-300 Nystrom matrix
# cannot resolve relative 1e-6, so the comparison is informational only
NYSTROM_RESOLUTION = 1e-8


@dataclass(frozen=True)
class Check:
    name: str
    beta: float
    value: float
    tolerance: float
    passed: bool
    warning: bool = False
    detail: str = ""

    @property
    def status(self) -> str:
        if not self.passed:
            return "FAIL"
        return "WARN" if self.warning else "PASS"


def _check(name, beta, value, tol, detail=""):
    value = float(value)
    return Check(name, float(beta), value, tol, bool(value <= tol), detail=detail)


def orthonormality_error(beta, kmax: int = 40, order: int = 120) -> float:
    """``max |int psi_j psi_k phi_beta - delta_jk|`` over ``j, k <= kmax``.

    ``psi_j psi_k phi_beta`` is a polynomial times ``exp(-2c x**2)``, so a
    Gauss rule for N(0, 1/(4c)) integrates it exactly once the density ratio
    is folded in.
    """
    beta = as_beta(beta)
    c = mercer_constants(beta)["c"]
    sd = 1.0 / (2.0 * math.sqrt(c))
    rule = gauss_hermite_rule(order, sd)
    x = np.asarray(rule.nodes)
    w = np.asarray(rule.weights) * weight_density(x, beta) / weight_density(x, sd)
    psi = mercer_basis(beta, kmax + 1).evaluate(x)
    gram = (psi * w) @ psi.T
    return float(np.max(np.abs(gram - np.eye(kmax + 1))))


def eigen_relation_error(beta, kmax: int = 20, points=(0.3, 1.7), order: int = 80) -> float:
    """``max |int K0(s,t) psi_k(t) phi_beta(t) dt - lam_k psi_k(s)|``.

    The integrand is a polynomial times a Gaussian in ``t`` centred at
    ``s / (2A)`` with variance ``1/(2A)``, ``A = a + c + 1/2``.
    """
    beta = as_beta(beta)
    cst = mercer_constants(beta)
    big_a = cst["a"] + cst["c"] + 0.5
    sd = 1.0 / math.sqrt(2.0 * big_a)
    base = gauss_hermite_rule(order, sd)
    basis = mercer_basis(beta, kmax + 1)
    worst = 0.0
    for s in points:
        t = np.asarray(base.nodes) + s / (2.0 * big_a)
        log_ratio = (
            -0.5 * (s - t) ** 2
            + np.log(weight_density(t, beta))
            + 0.5 * ((t - s / (2.0 * big_a)) / sd) ** 2
            + math.log(sd * math.sqrt(2.0 * math.pi))
        )
        w = np.asarray(base.weights) * np.exp(log_ratio)
        lhs = basis.evaluate(t) @ w
        rhs = basis.eigenvalues * basis.evaluate(np.array([s]))[:, 0]
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def parity_zero_error(beta, J: int = 150) -> float:
    """Largest quadrature coefficient that should vanish by parity."""
    beta = as_beta(beta)
    basis = mercer_basis(beta, J)
    raw = _quadrature_coefficients(basis, gauss_hermite_rule(J // 2 + 40, 1.0))
    j = np.arange(J)[:, None]
    zero = np.where(j % 2 == 1, np.array([[1, 0, 1]]), np.array([[0, 1, 0]])).astype(bool)
    return float(np.max(np.abs(raw[zero])))


def parseval_errors(beta, J: int = 150) -> np.ndarray:
    """Relative errors of ``sum_j a[j][k]**2`` against ``int phi_k**2 phi_beta``."""
    beta = as_beta(beta)
    b2 = beta.value**2
    v = 1.0 + 2.0 * b2
    exact = np.array([1.5 * b2 * b2 / v**2.5, b2 / v**1.5, 1.0 / math.sqrt(v)])
    a = coefficients(mercer_basis(beta, J)).a
    return np.abs(np.sum(a * a, axis=0) - exact) / exact


def _statistic_checks(beta, samples=1000, n=20, seed=7):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, n)) * rng.exponential(size=(samples, 1))
    t = statistic_batch(x, beta)
    scale = rng.uniform(-5, 5, size=(samples, 1))
    scale[np.abs(scale) < 0.1] = 1.0
    moved = statistic_batch(scale * x + rng.uniform(-10, 10, size=(samples, 1)), beta)
    return float(-t.min()), float(np.max(np.abs(moved - t) / np.maximum(1.0, np.abs(t))))


def run_checks(beta) -> list[Check]:
    """Every module invariant for one ``beta``."""
    beta = as_beta(beta)
    b = beta.value
    out = []
    cst = mercer_constants(beta)
    out.append(_check("mercer_trace", b, abs(cst["lambda0"] / (1.0 - cst["ratio"]) - 1.0), 1e-12))
    out.append(_check("orthonormality", b, orthonormality_error(beta), 1e-9))
    out.append(_check("eigen_relation", b, eigen_relation_error(beta), 1e-9))
    out.append(_check("parity_zeros", b, parity_zero_error(beta), 1e-13))
    out.append(_check("parseval", b, parseval_errors(beta).max(), 1e-10))

    spec = find_spectrum(beta, 10)
    ny = nystrom_spectrum(beta, count=10)
    rel = np.abs(spec.eigenvalues - ny) / spec.eigenvalues
    resolved = spec.eigenvalues / spec.eigenvalues[0] > NYSTROM_RESOLUTION
    out.append(_check("cross_oracle", b, rel[resolved].max(), 1e-6, f"{resolved.sum()} of 10 compared"))
    if not resolved.all():
        out.append(
            Check(
                "cross_oracle_tiny", b, float(rel[~resolved].max()), math.inf, True, warning=True,
                detail=f"{(~resolved).sum()} eigenvalues below Nystrom resolution",
            )
        )
    out.append(_check("secular_residual", b, np.max(spec.residuals, initial=0.0), 1e-6))

    closed = cumulants_closed(beta)
    traced = cumulants_from_traces(beta)
    disc = max(abs(traced.kappa[m] - closed.kappa[m]) / closed.kappa[m] for m in range(2))
    out.append(_check("cumulant_agreement", b, disc, 1e-7))

    fit = pearson_fit(traced)
    _, mean, var, skew, exkurt = fit.moments()
    k = traced.kappa
    target = (k[0], k[1], k[2] / k[1] ** 1.5, k[3] / k[1] ** 2)
    got = (mean, var, skew, exkurt)
    out.append(
        _check("pearson_round_trip", b, max(abs(g - t) / abs(t) for g, t in zip(got, target)), 1e-6,
               fit.pearson_type)
    )

    neg, affine = _statistic_checks(beta)
    out.append(_check("statistic_nonnegative", b, neg, 1e-12))
    out.append(_check("statistic_affine", b, affine, 1e-9))
    return out
