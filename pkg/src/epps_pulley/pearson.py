"""Pearson-system fit to four cumulants and its quantile function.

Working in the centred variable ``y = x - mean``, every Pearson density
solves

    p'(y) / p(y) = -(D y + C1) / (C0 + C1 y + C2 y**2),

with ``C0 = var (4 b2 - 3 b1)``, ``C1 = sd sqrt(b1) (b2 + 3)``,
``C2 = 2 b2 - 3 b1 - 6`` and ``D = 10 b2 - 12 b1 - 18``, where ``b1`` is the
squared skewness and ``b2`` the kurtosis.  The roots of the quadratic decide
the type.  ``D`` is kept in the numerator because it vanishes inside the
type I region (the uniform law sits on ``D = 0``); outside type I and II it
is positive and the usual normalized ``c_i = C_i / D`` are used.  Negative
skewness is handled by fitting the mirrored distribution, so internally
``C1 >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ContractViolation, DomainError

__all__ = ["PearsonFit", "pearson_fit", "pearson_quantile", "pearson_criterion"]

# boundary-type snapping tolerance on the selection criterion
SNAP = 1e-9
CDF_TOL = 1e-10


def pearson_criterion(b1: float, b2: float) -> float:
    """Pearson's ``kappa = b1 (b2 + 3)**2 / (4 (4 b2 - 3 b1)(2 b2 - 3 b1 - 6))``."""
    den = 4.0 * (4.0 * b2 - 3.0 * b1) * (2.0 * b2 - 3.0 * b1 - 6.0)
    if den == 0.0:
        return math.inf if b1 > 0 else 0.0
    return b1 * (b2 + 3.0) ** 2 / den


@dataclass(frozen=True)
class PearsonFit:
    """A member of the Pearson system matched to four cumulants.

    ``params`` holds the type-specific parameters of the standard family the
    centred, possibly mirrored variable maps onto; ``coefficients`` is
    ``(C0, C1, C2, D)`` and ``support`` is in the original ``x`` scale.
    """

    mean: float
    variance: float
    skew_sq: float
    kurtosis: float
    pearson_type: str
    params: dict = field(default_factory=dict)
    support: tuple = (-math.inf, math.inf)
    sign: float = 1.0
    coefficients: tuple = (0.0, 0.0, 0.0, 1.0)

    # -- internal helpers in the mirrored, centred variable y ------------------

    def _to_y(self, x):
        return self.sign * (np.asarray(x, dtype=float) - self.mean)

    def _log_kernel(self, y):
        """Unnormalized log density in ``y`` (type IV only)."""
        big0, big1, big2, den = self.coefficients
        c0, c1, c2 = big0 / den, big1 / den, big2 / den
        e = c1 / (2.0 * c2)
        d = self.params["d"]
        q = c2 * ((y + e) ** 2 + d * d)
        slope = (c1 - e) / (c2 * d)
        return -np.log(q) / (2.0 * c2) - slope * np.arctan((y + e) / d)

    def _type4_pdf(self, y):
        return np.exp(self._log_kernel(y) - self.params["log_norm"])

    def _cdf_y(self, y):
        t = self.pearson_type
        p = self.params
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            if t == "normal":
                return special.ndtr(y / math.sqrt(self.variance))
            if t in ("I", "II"):
                z = np.clip((y - p["lo"]) / (p["hi"] - p["lo"]), 0.0, 1.0)
                return special.betainc(p["a"], p["b"], z)
            if t == "III":
                z = np.maximum((y - p["lo"]) / p["scale"], 0.0)
                return special.gammainc(p["shape"], z)
            if t == "V":
                z = y - p["lo"]
                out = np.where(z > 0, special.gammaincc(p["shape"], p["scale"] / np.where(z > 0, z, 1.0)), 0.0)
                return out
            if t == "VI":
                z = np.maximum((y - p["lo"]) / p["scale"], 0.0)
                return special.betainc(p["a"], p["b"], z / (1.0 + z))
            if t == "VII":
                return special.stdtr(p["df"], y / p["scale"])
        if t == "IV":
            return np.vectorize(self._type4_cdf)(y)
        raise AssertionError(t)

    def _type4_cdf(self, y):
        mode = self.params["mode"]
        if y <= mode:
            v, _ = integrate.quad(self._type4_pdf, -np.inf, y, epsabs=1e-14, epsrel=1e-12, limit=200)
            return v
        v, _ = integrate.quad(self._type4_pdf, y, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
        return 1.0 - v

    def _pdf_y(self, y):
        t = self.pearson_type
        p = self.params
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            if t == "normal":
                s = math.sqrt(self.variance)
                return np.exp(-0.5 * (y / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
            if t in ("I", "II"):
                w = p["hi"] - p["lo"]
                z = (y - p["lo"]) / w
                inside = (z > 0) & (z < 1)
                zz = np.where(inside, z, 0.5)
                logp = (p["a"] - 1) * np.log(zz) + (p["b"] - 1) * np.log1p(-zz) - special.betaln(p["a"], p["b"])
                return np.where(inside, np.exp(logp) / w, 0.0)
            if t == "III":
                z = (y - p["lo"]) / p["scale"]
                zz = np.where(z > 0, z, 1.0)
                logp = (p["shape"] - 1) * np.log(zz) - zz - special.gammaln(p["shape"])
                return np.where(z > 0, np.exp(logp) / p["scale"], 0.0)
            if t == "V":
                z = y - p["lo"]
                zz = np.where(z > 0, z, 1.0)
                a, s = p["shape"], p["scale"]
                logp = a * math.log(s) - special.gammaln(a) - (a + 1) * np.log(zz) - s / zz
                return np.where(z > 0, np.exp(logp), 0.0)
            if t == "VI":
                z = (y - p["lo"]) / p["scale"]
                zz = np.where(z > 0, z, 1.0)
                logp = (p["a"] - 1) * np.log(zz) - (p["a"] + p["b"]) * np.log1p(zz) - special.betaln(p["a"], p["b"])
                return np.where(z > 0, np.exp(logp) / p["scale"], 0.0)
            if t == "VII":
                df, s = p["df"], p["scale"]
                logp = (
                    special.gammaln((df + 1) / 2)
                    - special.gammaln(df / 2)
                    - 0.5 * math.log(df * math.pi)
                    - (df + 1) / 2 * np.log1p((y / s) ** 2 / df)
                )
                return np.exp(logp) / s
            if t == "IV":
                return self._type4_pdf(y)
        raise AssertionError(t)

    # -- public ---------------------------------------------------------------

    def pdf(self, x):
        out = self._pdf_y(self._to_y(x))
        return out[()] if np.ndim(out) == 0 else out

    def cdf(self, x):
        y = self._to_y(x)
        f = self._cdf_y(y)
        out = f if self.sign > 0 else 1.0 - f
        return out[()] if np.ndim(out) == 0 else out

    def moments(self) -> tuple:
        """Mean, variance, skewness, excess kurtosis of the fitted density by quadrature."""
        lo, hi = self.support

        def integ(fn):
            if math.isfinite(lo) and math.isfinite(hi):
                v, _ = integrate.quad(fn, lo, hi, epsabs=0, epsrel=1e-12, limit=400)
                return v
            # split at the mean for a better-behaved integrand on each side
            left = integrate.quad(fn, lo, self.mean, epsabs=0, epsrel=1e-12, limit=400)[0]
            right = integrate.quad(fn, self.mean, hi, epsabs=0, epsrel=1e-12, limit=400)[0]
            return left + right

        mass = integ(lambda x: self.pdf(x))
        m1 = integ(lambda x: x * self.pdf(x)) / mass
        cm = [integ(lambda x, k=k: (x - m1) ** k * self.pdf(x)) / mass for k in (2, 3, 4)]
        return mass, m1, cm[0], cm[1] / cm[0] ** 1.5, cm[2] / cm[0] ** 2 - 3.0


def _coerce_cumulants(cumulants):
    k = getattr(cumulants, "kappa", cumulants)
    k = tuple(float(v) for v in k)
    if len(k) != 4 or not all(math.isfinite(v) for v in k):
        raise ContractViolation("need four finite cumulants")
    return k


def pearson_fit(cumulants) -> PearsonFit:
    """Select the Pearson type for four cumulants and match its parameters.

    ``cumulants`` is a :class:`~epps_pulley.cumulants.CumulantSet` or a
    sequence ``(k1, k2, k3, k4)``.

    Raises
    ------
    DomainError
        If ``k2 <= 0`` or the moments violate ``b2 > b1 + 1``.
    """
    k1, k2, k3, k4 = _coerce_cumulants(cumulants)
    if k2 <= 0:
        raise DomainError(f"variance must be positive, got {k2}")
    b1 = k3 * k3 / k2**3
    b2 = 3.0 + k4 / (k2 * k2)
    if not b2 > b1 + 1.0:
        raise DomainError(f"(b1, b2) = ({b1:.6g}, {b2:.6g}) violates b2 > b1 + 1")
    den = 10.0 * b2 - 12.0 * b1 - 18.0
    sd = math.sqrt(k2)
    sign = -1.0 if k3 < 0 else 1.0
    big0 = k2 * (4.0 * b2 - 3.0 * b1)
    big1 = sd * math.sqrt(b1) * (b2 + 3.0)
    big2 = 2.0 * b2 - 3.0 * b1 - 6.0
    crit = pearson_criterion(b1, b2)

    common = dict(mean=k1, variance=k2, skew_sq=b1, kurtosis=b2, sign=sign, coefficients=(big0, big1, big2, den))

    def finish(ptype, params, lo_y=-math.inf, hi_y=math.inf):
        if sign > 0:
            support = (k1 + lo_y, k1 + hi_y)
        else:
            support = (k1 - hi_y, k1 - lo_y)
        return PearsonFit(pearson_type=ptype, params=params, support=support, **common)

    if b1 <= SNAP:
        if abs(b2 - 3.0) <= SNAP:
            return finish("normal", {})
        if b2 < 3.0:
            # p ~ (C0 + C2 y**2)**(-D / (2 C2)) with C2 < 0
            radius = math.sqrt(-big0 / big2)
            m = -den / (2.0 * big2)
            return finish("II", {"a": m + 1.0, "b": m + 1.0, "lo": -radius, "hi": radius}, -radius, radius)
        c0, c2 = big0 / den, big2 / den
        df = 1.0 / c2 - 1.0
        return finish("VII", {"df": df, "scale": math.sqrt(c0 / (c2 * df))})

    if crit < 0:
        # real roots of opposite sign, density between them
        r1, r2 = sorted(np.roots([big2, big1, big0]).real)
        m1 = -(den * r1 + big1) / (big2 * (r1 - r2))
        m2 = -(den * r2 + big1) / (big2 * (r2 - r1))
        if m1 <= -1 or m2 <= -1:
            raise DomainError(f"type I exponents ({m1:.3g}, {m2:.3g}) not integrable")
        return finish("I", {"a": m1 + 1.0, "b": m2 + 1.0, "lo": r1, "hi": r2}, r1, r2)

    # beyond type I the kurtosis exceeds 1.5 b1 + 3, so D > 0
    c0, c1, c2 = big0 / den, big1 / den, big2 / den
    if abs(c2) <= SNAP * max(1.0, abs(c1)):
        shape = c0 / (c1 * c1)
        lo = -c0 / c1
        return finish("III", {"shape": shape, "scale": c1, "lo": lo}, lo)
    if abs(crit - 1.0) <= SNAP:
        r = -c1 / (2.0 * c2)
        shape = 1.0 / c2 - 1.0
        scale = -(c1 + r) / c2
        if shape <= 0 or scale <= 0:
            raise DomainError("type V parameters not admissible")
        return finish("V", {"shape": shape, "scale": scale, "lo": r}, r)
    if crit > 1:
        r_lo, r_hi = sorted(np.roots([c2, c1, c0]).real)
        e_hi = -(c1 + r_hi) / (c2 * (r_hi - r_lo))
        e_lo = -(c1 + r_lo) / (c2 * (r_lo - r_hi))
        a = e_hi + 1.0
        b = -(e_hi + e_lo) - 1.0
        if a <= 0 or b <= 0:
            raise DomainError(f"type VI parameters ({a:.3g}, {b:.3g}) not admissible")
        return finish("VI", {"a": a, "b": b, "lo": r_hi, "scale": r_hi - r_lo}, r_hi)

    # 0 < crit < 1: complex roots, type IV
    d = math.sqrt(4.0 * c0 * c2 - c1 * c1) / (2.0 * c2)
    fit = finish("IV", {"d": d, "mode": -c1, "log_norm": 0.0})
    peak = float(fit._log_kernel(np.array(-c1)))
    fit.params["log_norm"] = peak
    mass, _ = integrate.quad(fit._type4_pdf, -np.inf, np.inf, epsabs=0, epsrel=1e-13, limit=400)
    fit.params["log_norm"] = peak + math.log(mass)
    return fit


def pearson_quantile(fit: PearsonFit, p: float) -> float:
    """``p``-quantile of a fitted Pearson distribution.

    Bracket by expanding from the mean in steps of the standard deviation,
    then bisect.  Bisection runs until the bracket is a few ulps wide rather
    than stopping at ``|cdf(q) - p| < 1e-10``: on steep CDFs that residual
    alone leaves the quantile uncertain at the 1e-9 level.  Next to an
    endpoint where the density is infinite the CDF can jump by more than
    1e-10 between adjacent doubles; the result is then the double at which
    it crosses ``p``.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ContractViolation(f"probability must lie in (0, 1), got {p}")
    sd = math.sqrt(fit.variance)
    lo_s, hi_s = fit.support
    lo = hi = fit.mean
    step = sd
    while fit.cdf(lo) > p:
        lo = max(lo - step, lo_s) if math.isfinite(lo_s) else lo - step
        step *= 2.0
        if lo == lo_s:
            break
    step = sd
    while fit.cdf(hi) < p:
        hi = min(hi + step, hi_s) if math.isfinite(hi_s) else hi + step
        step *= 2.0
        if hi == hi_s:
            break
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = fit.cdf(mid)
        if f == p or hi - lo <= 2.0 * np.spacing(max(abs(lo), abs(hi))) or mid in (lo, hi):
            break
        if f < p:
            lo = mid
        else:
            hi = mid
    return float(mid)
