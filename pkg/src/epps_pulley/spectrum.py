"""Eigenvalues of the covariance operator ``(A f)(s) = int K(s, t) f(t) phi_beta(t) dt``.

In the Mercer basis of ``K0`` the operator is ``diag(lam) - U U^T`` where the
columns of ``U`` hold the coefficients ``a[j, k] = <psi_j, phi_k>``.  Parity
splits the problem: odd ``j`` only meet ``phi_2`` (a rank-one downdate),
even ``j`` meet ``phi_1`` and ``phi_3`` (rank two).  For a sector with poles
``lam_j`` and coefficient matrix ``U`` the secular matrix is

    S(rho) = I + sum_j u_j u_j^T / (rho - lam_j),

and ``rho`` is an eigenvalue exactly when ``det S(rho) = 0``.  By the
Haynsworth inertia formula the number of eigenvalues above ``rho`` is

    #{lam_j > rho} + #{positive eigenvalues of S(rho)} - rank,

which turns root isolation into a monotone counting problem and handles
two roots sharing an inter-pole interval without special cases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConsistencyError, ContractViolation, UnderResolved
from .kernels import TuningBeta, as_beta, nystrom_matrix
from .mercer import (
    DEFAULT_TRUNCATION,
    MercerBasis,
    _normalized_hermite_table,
    mercer_basis,
    mercer_constants,
)
from .quadrature import DEFAULT_NYSTROM_ORDER, gauss_hermite_rule, symmetric_eigenvalues

__all__ = [
    "CoefficientTable",
    "SpectrumResult",
    "coefficients",
    "secular_odd",
    "secular_even",
    "find_spectrum",
    "nystrom_spectrum",
    "ConvergenceWarning",
    "DEFAULT_SCAN",
    "DEFAULT_TOL",
]

DEFAULT_SCAN = 64
DEFAULT_TOL = 1e-12
PARITY_ZERO = 1e-13
RESIDUAL_WARN = 1e-6


class ConvergenceWarning(UserWarning):
    """A root was bracketed but the secular function is not small there."""


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """``a[j, k-1] = int psi_j(x) phi_k(x) phi_beta(x) dx`` for ``j < J``, ``k = 1, 2, 3``."""

    beta: TuningBeta
    J: int
    a: np.ndarray = field(repr=False)
    flagged: tuple = ()


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Leading eigenvalues of the covariance operator, descending.

    ``parity[i]`` is ``"even"`` or ``"odd"`` by the sector whose secular
    function produced the root; ``brackets[i]`` is the probe interval that
    isolated it and ``residuals[i]`` the absolute secular function value
    (``S`` for odd, ``det S`` for even) at the returned root.
    """

    beta: TuningBeta
    eigenvalues: np.ndarray
    parity: tuple
    brackets: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    J: int = DEFAULT_TRUNCATION
    warnings: tuple = ()

    def __len__(self):
        return len(self.eigenvalues)


def _closed_form_coefficients(basis: MercerBasis) -> np.ndarray:
    """Coefficients from Gaussian-Hermite moment identities, in log space.

    After absorbing every Gaussian factor the integrals are
    ``int x**p exp(-A x**2) H_j(g x) dx`` with ``A = a + c + 1/2`` and
    ``g**2 = 2c``; the generating function of ``H_j`` gives them in closed
    form in terms of ``r = g**2/A - 1`` (always negative).
    """
    cst = mercer_constants(basis.beta)
    a, c = cst["a"], cst["c"]
    big_a = a + c + 0.5
    g2 = 2.0 * c
    r = g2 / big_a - 1.0
    log_r = math.log(-r)
    log_pref = 0.5 * math.log(2.0 * a / big_a)
    j = np.arange(basis.count)
    m = j // 2
    base = basis.log_norms + log_pref + gammaln(j + 1.0) - gammaln(m + 1.0) + m * log_r
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    even = j % 2 == 0
    out = np.zeros((basis.count, 3))
    with np.errstate(under="ignore"):
        out[even, 2] = sign[even] * np.exp(base[even])
        out[~even, 1] = sign[~even] * np.exp(base[~even]) * math.sqrt(g2) / big_a
        # x**2 moment: r**m/(2A m!) + g**2 r**(m-1)/(A**2 (m-1)!), factored at r**(m-1)/(m-1)!
        me = m[even]
        bracket = np.where(me > 0, r / (2.0 * big_a * np.maximum(me, 1)) + g2 / big_a**2, 0.0)
        log1 = (
            basis.log_norms[even]
            + log_pref
            - 0.5 * math.log(2.0)
            + gammaln(j[even] + 1.0)
            - gammaln(np.maximum(me, 1).astype(float))
            + (me - 1) * log_r
        )
        sign1 = np.where((me - 1) % 2 == 0, 1.0, -1.0)
        first = sign1 * np.exp(log1) * bracket
        m0 = math.exp(basis.log_norms[0] + log_pref) / (math.sqrt(2.0) * 2.0 * big_a)
        out[even, 0] = np.where(me > 0, first, m0)
    return out


def _quadrature_coefficients(basis: MercerBasis, rule) -> np.ndarray:
    """Coefficients by Gaussian quadrature against the absorbed Gaussian.

    The integrand ``psi_j phi_k phi_beta`` equals ``sqrt(2a/A)`` times a
    polynomial of degree ``j + 2`` against the N(0, 1/(2A)) density, so the
    rescaled rule is exact once ``order >= j/2 + 2``.
    """
    cst = mercer_constants(basis.beta)
    big_a = cst["a"] + cst["c"] + 0.5
    sub = rule.rescaled(1.0 / math.sqrt(2.0 * big_a))
    x = sub.nodes
    # h_j H_j(g x) without the exp(-(c-a) x**2) envelope
    table = _normalized_hermite_table(basis.count - 1, cst["scale"] * x, cst["log_h0"] * np.ones_like(x))
    pref = math.sqrt(2.0 * cst["a"] / big_a)
    w = sub.weights * pref
    f = np.stack([x * x / math.sqrt(2.0), x, np.ones_like(x)])
    return (table * w) @ f.T


def coefficients(basis: MercerBasis, rule=None) -> CoefficientTable:
    """Coefficient table ``a[j, k]`` for the basis.

    Without ``rule`` the closed-form moments are used (full relative accuracy
    for every ``j``).  With a rule, the integrals are evaluated by quadrature;
    entries that vanish by parity are zeroed when below 1e-13 in magnitude.

    Raises
    ------
    ConsistencyError
        If a parity-zero entry exceeds 1e-13 in magnitude.
    """
    if rule is None:
        a = _closed_form_coefficients(basis)
    else:
        if rule.order < basis.count / 2 + 4:
            raise ContractViolation(
                f"rule order {rule.order} too small for J={basis.count} (need >= J/2 + 4)"
            )
        a = _quadrature_coefficients(basis, rule)
    j = np.arange(basis.count)
    zero_mask = np.zeros_like(a, dtype=bool)
    zero_mask[j % 2 == 0, 1] = True
    zero_mask[j % 2 == 1, 0] = True
    zero_mask[j % 2 == 1, 2] = True
    bad = np.argwhere(zero_mask & (np.abs(a) >= PARITY_ZERO))
    if bad.size:
        jj, kk = bad[0]
        raise ConsistencyError(
            f"coefficient a[{jj}][{kk + 1}] = {a[jj, kk]:.3e} should vanish by parity"
        )
    a[zero_mask] = 0.0
    if not np.all(np.isfinite(a)):
        raise ConsistencyError("non-finite coefficient")
    a.setflags(write=False)
    return CoefficientTable(basis.beta, basis.count, a)


# ---------------------------------------------------------------------------
# secular functions


def _neumaier_sum(terms, axis=-1):
    """Compensated sum along ``axis``."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, -1)
    s = np.zeros(terms.shape[:-1])
    comp = np.zeros_like(s)
    for i in range(terms.shape[-1]):
        x = terms[..., i]
        t = s + x
        comp += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return s + comp


def _sector(table: CoefficientTable, basis: MercerBasis, parity: str):
    j = np.arange(table.J)
    sel = j % 2 == (1 if parity == "odd" else 0)
    poles = np.asarray(basis.eigenvalues[: table.J])[sel]
    if parity == "odd":
        u = table.a[sel][:, [1]]
    else:
        u = table.a[sel][:, [0, 2]]
    return poles, u


def _secular_matrix(rho, poles, u):
    """Entries of ``S(rho)`` for an array of ``rho``; shape ``rho.shape + (k, k)``."""
    rho = np.asarray(rho, dtype=float)
    d = rho[..., None] - poles
    if np.any(d == 0.0):
        raise ContractViolation("secular function evaluated at a pole")
    k = u.shape[1]
    out = np.empty(rho.shape + (k, k))
    for p in range(k):
        for q in range(p, k):
            terms = (u[:, p] * u[:, q]) / d
            # leading 1 joins the compensated sum
            if p == q:
                terms = np.concatenate([np.ones(rho.shape + (1,)), terms], axis=-1)
            val = _neumaier_sum(terms)
            out[..., p, q] = val
            out[..., q, p] = val
    return out


def _check_pole(rho, poles):
    rho = np.asarray(rho, dtype=float)
    close = np.abs(rho[..., None] - poles) <= 1e-15 * np.abs(poles)
    if np.any(close):
        raise ContractViolation("secular function evaluated at a pole")


def secular_odd(rho, table: CoefficientTable, basis: MercerBasis):
    """Odd-sector secular function ``1 + sum_{j odd} a[j,2]**2 / (rho - lam_j)``."""
    poles, u = _sector(table, basis, "odd")
    _check_pole(rho, poles)
    out = _secular_matrix(rho, poles, u)[..., 0, 0]
    return out[()] if out.ndim == 0 else out


def secular_even(rho, table: CoefficientTable, basis: MercerBasis):
    """Even-sector determinant ``S_1(rho) S_3(rho) - S_13(rho)**2``."""
    poles, u = _sector(table, basis, "even")
    _check_pole(rho, poles)
    s = _secular_matrix(rho, poles, u)
    out = s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] ** 2
    return out[()] if out.ndim == 0 else out


def _count_above(rho, poles, u):
    """Number of sector eigenvalues strictly greater than each ``rho``."""
    rho = np.asarray(rho, dtype=float)
    s = _secular_matrix(rho, poles, u)
    k = u.shape[1]
    if k == 1:
        npos = (s[..., 0, 0] > 0).astype(int)
    else:
        det = s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] ** 2
        tr = s[..., 0, 0] + s[..., 1, 1]
        npos = np.where(det < 0, 1, np.where(tr > 0, 2, 0))
    n_poles = np.sum(poles > rho[..., None], axis=-1)
    return n_poles + npos - k


def _secular_value(rho, poles, u):
    s = _secular_matrix(rho, poles, u)
    if u.shape[1] == 1:
        return s[..., 0, 0]
    return s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] ** 2


def _probe_grid(poles, scan, wanted):
    """Log-spaced probes strictly inside each inter-pole interval, descending.

    Covers the interval above the largest pole and every interval down to the
    ``wanted + rank``-th pole (interlacing puts the ``i``-th root above pole
    ``i + rank``), then one interval below it.
    """
    p = np.sort(poles)[::-1]
    grids = [np.geomspace(2.0 * p[0], p[0], scan + 2)[1:-1]]
    stop = min(len(p) - 1, wanted + 2)
    for i in range(stop):
        grids.append(np.geomspace(p[i], p[i + 1], scan + 2)[1:-1])
    lo_end = p[stop] * (p[stop] / p[stop - 1] if stop > 0 else 0.5)
    grids.append(np.geomspace(p[stop], lo_end, scan + 2)[1:-1])
    return np.concatenate(grids)


def _sector_roots(poles, u, wanted, scan, tol):
    """Largest ``wanted`` roots of one sector: values, brackets, residuals."""
    probes = _probe_grid(poles, scan, wanted)
    counts = _count_above(probes, poles, u)
    found = int(counts[-1])
    n = min(wanted, found)
    roots = np.empty(n)
    brackets = np.empty((n, 2))
    for i in range(n):
        # first probe (descending) where at least i+1 roots lie above it
        idx = int(np.argmax(counts >= i + 1))
        hi = probes[idx - 1] if idx > 0 else 2.0 * poles.max()
        lo = probes[idx]
        brackets[i] = (lo, hi)
        roots[i] = _bisect_count(lo, hi, i + 1, poles, u, tol)
    residuals = np.abs(_secular_value(roots, poles, u)) if n else np.empty(0)
    return roots, brackets, residuals


def _bisect_count(lo, hi, target, poles, u, tol):
    """Bisection in log space on the counting function.

    Invariant: ``count(lo) >= target > count(hi)``.  Finishes with one
    secant step on the secular function when it changes sign on the final
    bracket.
    """
    for _ in range(200):
        if hi - lo <= tol * lo:
            break
        mid = math.sqrt(lo * hi)
        if np.any(poles == mid):
            # geometric probes sit symmetrically around poles
            mid = float(np.nextafter(mid, hi))
        if mid <= lo or mid >= hi:
            break
        if _count_above(np.array([mid]), poles, u)[0] >= target:
            lo = mid
        else:
            hi = mid
    f_lo, f_hi = _secular_value(np.array([lo, hi]), poles, u)
    if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi < 0:
        x = lo - f_lo * (hi - lo) / (f_hi - f_lo)
        if lo < x < hi:
            return x
    return math.sqrt(lo * hi)


def find_spectrum(
    beta,
    count: int,
    J: int = DEFAULT_TRUNCATION,
    tol: float = DEFAULT_TOL,
    scan: int = DEFAULT_SCAN,
) -> SpectrumResult:
    """Leading ``count`` eigenvalues of the covariance operator.

    Roots of the odd and even secular functions are isolated on a grid of
    ``scan`` log-spaced probes per inter-pole interval, refined by bisection
    to relative width ``tol``, then merged and sorted.

    Raises
    ------
    UnderResolved
        If fewer than ``count`` roots are found; increase ``J``.
    """
    beta = as_beta(beta)
    if isinstance(count, bool) or int(count) != count or count < 0:
        raise ContractViolation(f"count must be a non-negative integer, got {count!r}")
    count = int(count)
    if count > 2 * J / 3:
        raise ContractViolation(f"count={count} exceeds 2J/3 for J={J}; raise J")
    if count == 0:
        empty = np.empty(0)
        return SpectrumResult(beta, empty, (), np.empty((0, 2)), empty, J)
    basis = mercer_basis(beta, J)
    table = coefficients(basis)
    vals, pars, brs, res = [], [], [], []
    for parity in ("odd", "even"):
        poles, u = _sector(table, basis, parity)
        r, b, s = _sector_roots(poles, u, count, scan, tol)
        vals.append(r)
        brs.append(b)
        res.append(s)
        pars += [parity] * len(r)
    vals = np.concatenate(vals)
    if len(vals) < count:
        raise UnderResolved(
            f"found {len(vals)} roots for beta={beta.value}, wanted {count}; "
            "increase J or the scan density"
        )
    order = np.argsort(-vals, kind="stable")[:count]
    brackets = np.concatenate(brs)[order]
    residuals = np.concatenate(res)[order]
    notes = []
    for i, rv in enumerate(residuals):
        if not rv <= RESIDUAL_WARN:
            msg = f"eigenvalue {i}: secular residual {rv:.2e} above {RESIDUAL_WARN:g}"
            notes.append(msg)
            warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    ev = vals[order]
    ev.setflags(write=False)
    return SpectrumResult(
        beta,
        ev,
        tuple(pars[i] for i in order),
        brackets,
        residuals,
        J,
        tuple(notes),
    )


def nystrom_spectrum(beta, rule=None, count: int = 10, order: int | None = None) -> np.ndarray:
    """Top ``count`` eigenvalues of the Nystrom discretization of the operator.

    An independent check on :func:`find_spectrum`: the symmetrized matrix
    ``sqrt(w_i w_j) K(x_i, x_j)`` is diagonalized by the Jacobi solver.
    """
    beta = as_beta(beta)
    if rule is None:
        rule = gauss_hermite_rule(order or DEFAULT_NYSTROM_ORDER, beta)
    if rule.beta != beta:
        raise ContractViolation("quadrature rule was built for a different beta")
    if rule.order < 4 * count:
        raise ContractViolation(f"rule order {rule.order} < 4 * count = {4 * count}")
    ev = symmetric_eigenvalues(nystrom_matrix(rule))
    return ev[:count]
