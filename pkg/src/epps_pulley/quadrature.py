"""Gauss-Hermite rules for the N(0, beta**2) weight and a dense Jacobi eigensolver."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractViolation, SolverFailure
from .kernels import TuningBeta, as_beta

__all__ = [
    "QuadratureRule",
    "gauss_hermite_rule",
    "hermite_nodes_weights",
    "symmetric_eigenvalues",
    "DEFAULT_COEFFICIENT_ORDER",
    "DEFAULT_NYSTROM_ORDER",
]

DEFAULT_COEFFICIENT_ORDER = 200
DEFAULT_NYSTROM_ORDER = 300

_NEWTON_MAXIT = 100


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """An ``order``-point Gaussian rule for the density of N(0, beta**2).

    ``nodes`` are increasing and symmetric about zero; ``weights`` are
    non-negative and sum to one (the outermost ones underflow to zero past
    order ~150).  Arrays are read-only.
    """

    nodes: np.ndarray
    weights: np.ndarray
    beta: TuningBeta
    order: int

    def integrate(self, values) -> float:
        """Weighted sum of ``values`` sampled at the nodes."""
        return float(np.dot(self.weights, values))

    def moment(self, m: int) -> float:
        return self.integrate(self.nodes**m)

    def rescaled(self, scale: float) -> "QuadratureRule":
        """The same rule for N(0, scale**2); nodes scale linearly, weights are unchanged."""
        scale = as_beta(scale)
        f = scale.value / self.beta.value
        return _freeze(self.nodes * f, self.weights, scale, self.order)


def _freeze(nodes, weights, beta, order):
    nodes = np.array(nodes, dtype=float)
    weights = np.array(weights, dtype=float)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, beta, order)


def _initial_guesses(n):
    """Semiclassical estimates of the nonnegative roots of H_n, largest first.

    The k-th largest root sits where the WKB zero count
    ``(2n+1)(phi - sin(phi)cos(phi)) / (2 pi)`` equals ``k - 1/4`` with
    ``x = sqrt(2n+1) cos(phi)``; the estimate is within about 1% of the
    local root spacing for every n.
    """
    m = (n + 1) // 2
    nu = 2 * n + 1
    target = 2.0 * np.pi * (np.arange(1, m + 1) - 0.25) / nu
    lo = np.zeros(m)
    hi = np.full(m, 0.5 * np.pi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = mid - np.sin(mid) * np.cos(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return math.sqrt(nu) * np.cos(0.5 * (lo + hi))


def _hermite_functions(n, z):
    """Orthonormal Hermite functions of degrees n and n - 1 at ``z``.

    Includes the factor ``exp(-z**2/2)`` so nothing overflows for large n.
    """
    p1 = np.full_like(z, math.pi**-0.25) * np.exp(-0.5 * z * z)
    p2 = np.zeros_like(z)
    for j in range(n):
        p1, p2 = z * math.sqrt(2.0 / (j + 1)) * p1 - math.sqrt(j / (j + 1)) * p2, p1
    return p1, p2


@lru_cache(maxsize=32)
def hermite_nodes_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for the weight ``exp(-u**2)`` on the real line.

    Newton iteration on the three-term recurrence, started from asymptotic
    guesses and kept inside brackets formed by the midpoints between
    neighbouring guesses.  Weights sum to ``sqrt(pi)``; those of the
    outermost nodes underflow to zero for orders above about 150.
    """
    n = int(order)
    z0 = _initial_guesses(n)
    m = z0.size
    mids = 0.5 * (z0[1:] + z0[:-1])
    hi = np.concatenate([[z0[0] + (z0[0] - mids[0] if m > 1 else 1.0)], mids])
    lo = np.concatenate([mids, [0.0]])
    if n % 2 == 0:
        lo[-1] = 0.0
    z = z0.copy()
    if n % 2 == 1:
        # the smallest "root" is the exact zero at the origin
        z[-1] = 0.0
    live = np.ones(m, dtype=bool)
    if n % 2 == 1:
        live[-1] = False
    for _ in range(_NEWTON_MAXIT):
        if not np.any(live):
            break
        zl = z[live]
        p1, p2 = _hermite_functions(n, zl)
        dz = p1 / (math.sqrt(2.0 * n) * p2)
        step = zl - dz
        # fall back to the bracket midpoint when Newton leaves the bracket
        l, h = lo[live], hi[live]
        bad = ~((step > l) & (step < h)) | ~np.isfinite(step)
        step[bad] = 0.5 * (l[bad] + h[bad])
        z[live] = step
        # shrink brackets using the sign of p_n relative to the upper end
        converged = np.abs(step - zl) <= 1e-15 * np.maximum(1.0, np.abs(zl))
        idx = np.flatnonzero(live)
        live[idx[converged]] = False
        if np.any(bad):
            pb, _ = _hermite_functions(n, step[bad])
            ph, _ = _hermite_functions(n, h[bad])
            same = np.sign(pb) == np.sign(ph)
            bi = idx[bad]
            hi[bi[same]] = step[bad][same]
            lo[bi[~same]] = step[bad][~same]
    if np.any(live):
        bad = int(np.flatnonzero(live)[0])
        raise SolverFailure(f"Hermite node {bad} of order {n} did not converge", index=bad)
    _, p2 = _hermite_functions(n, z)
    with np.errstate(divide="ignore", under="ignore"):
        # w = 2 / p_n'(z)**2 with the Gaussian factor restored
        w = np.exp(math.log(2.0) - 2.0 * np.log(math.sqrt(2.0 * n) * np.abs(p2)) - z * z)
    x = np.concatenate([-z, z[::-1][1:] if n % 2 == 1 else z[::-1]])
    w = np.concatenate([w, w[::-1][1:] if n % 2 == 1 else w[::-1]])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_hermite_rule(order: int, beta) -> QuadratureRule:
    """Gaussian quadrature rule exact for polynomials of degree ``2*order - 1``
    against the N(0, beta**2) density.
    """
    if isinstance(order, bool) or int(order) != order or order < 1:
        raise ContractViolation(f"order must be a positive integer, got {order!r}")
    beta = as_beta(beta)
    u, w = hermite_nodes_weights(int(order))
    w = w / math.fsum(w)
    return _freeze(math.sqrt(2.0) * beta.value * u, w, beta, int(order))


def _round_robin(n):
    """Pairings of a round-robin tournament on ``n`` (even) players.

    Every pair appears exactly once across the ``n - 1`` rounds and the pairs
    within a round are disjoint, so their rotations commute.
    """
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array(players[: n // 2])
        q = np.array(players[n // 2 :][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def symmetric_eigenvalues(matrix, tol=1e-14, max_sweeps=60) -> np.ndarray:
    """Eigenvalues of a dense real symmetric matrix, in descending order.

    Cyclic Jacobi method.  Each sweep visits every off-diagonal pair once in
    round-robin order, applying a round's disjoint rotations together.
    Iteration stops once the off-diagonal Frobenius norm drops below
    ``tol`` times the Frobenius norm of the diagonal.

    Raises
    ------
    ContractViolation
        If the matrix is not square or not symmetric to 1e-12 relative.
    SolverFailure
        If ``max_sweeps`` sweeps do not reach the tolerance.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > 1e-12 * max(scale, np.finfo(float).tiny):
        raise ContractViolation("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if n == 1:
        return a.diagonal().copy()

    # pad to even size with a decoupled zero row/column
    odd = n % 2 == 1
    if odd:
        a = np.pad(a, ((0, 1), (0, 1)))
    size = a.shape[0]
    rounds = _round_robin(size)

    def off_norm(m):
        return math.sqrt(2.0 * np.sum(np.triu(m, 1) ** 2))

    for _ in range(max_sweeps):
        diag_norm = np.linalg.norm(a.diagonal())
        if off_norm(a) <= tol * diag_norm:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            app = a[p, p]
            aqq = a[q, q]
            theta = np.zeros_like(apq)
            with np.errstate(over="ignore"):
                theta[active] = (aqq[active] - app[active]) / (2.0 * apq[active])
            t = np.zeros_like(apq)
            # |theta| > 1e150: t ~ 1/(2 theta) and squaring would overflow
            big = np.abs(theta) > 1e150
            reg = active & ~big
            t[reg] = np.sign(theta[reg]) / (np.abs(theta[reg]) + np.sqrt(theta[reg] ** 2 + 1.0))
            t[active & big] = 0.5 / theta[active & big]
            t[active & (theta == 0.0)] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # rows then columns: A <- J^T A J
            rp = a[p, :].copy()
            rq = a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp = a[:, p].copy()
            cq = a[:, q].copy()
            a[:, p] = cp * c[None, :] - cq * s[None, :]
            a[:, q] = cp * s[None, :] + cq * c[None, :]
            a[p, q] = 0.0
            a[q, p] = 0.0
    else:
        raise SolverFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    ev = a.diagonal().copy()
    if odd:
        # drop the padding eigenvalue (exactly zero, never rotated: its row stays 0)
        ev = np.delete(ev, size - 1)
    return np.sort(ev)[::-1]
