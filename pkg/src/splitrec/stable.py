"""The weakly 1-stable limit law W and the normalization of record counts.

W has characteristic function

    E exp(itW) = exp(-(pi/2) m |t| + i t (C - m ln|t|)),   m = 1/mu,

i.e. a totally right-skewed (beta = 1) stable law of index 1 with scale
c = pi m / 2 and location C in the Samorodnitsky-Taqqu parameterization.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .errors import ConvergenceError
from .models import SplitVectorModel

EULER_GAMMA = float(np.euler_gamma)


def constant_C(mu: float, sigma2: float) -> float:
    """Location constant of the limit CF."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    m = 1.0 / mu
    return -m * math.log(m) + 2 * m - m * m * sigma2 - m * EULER_GAMMA - (sigma2 - mu * mu) / (2 * mu * mu)


def _t_log_abs_t(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = t * np.log(np.abs(t))
    return np.where(t == 0, 0.0, out)


def stable1_cf(t, c: float, beta: float, d: float):
    """General index-1 stable CF exp(i d t - c|t| (1 + i beta (2/pi) sign(t) ln|t|))."""
    t = np.asarray(t, dtype=float)
    return np.exp(1j * d * t - c * np.abs(t) - 1j * c * beta * (2 / np.pi) * _t_log_abs_t(t))


def _fourier_quad(f, weight: str, y: float, tol: float):
    """int_0^inf f(t) w(y t) dt: adaptive weighted rule on [0, 1], Fourier-cycle rule beyond."""
    eps = min(tol, 1e-13)
    a, e1 = integrate.quad(f, 0, 1, weight=weight, wvar=y, epsabs=eps, epsrel=1e-10, limit=400)
    b, e2 = integrate.quad(f, 1, np.inf, weight=weight, wvar=y, epsabs=eps, limlst=200)
    return a + b, e1 + e2


@dataclass(frozen=True)
class LimitDistribution:
    mu_inv: float
    C: float

    def __post_init__(self):
        if not self.mu_inv > 0:
            raise ValueError("mu_inv must be positive")

    # derived stable parameters
    alpha = 1.0
    beta = 1.0

    @property
    def scale(self) -> float:
        return math.pi * self.mu_inv / 2

    @property
    def loc(self) -> float:
        return self.C

    @classmethod
    def from_mu_sigma(cls, mu: float, sigma2: float) -> "LimitDistribution":
        return cls(1.0 / mu, constant_C(mu, sigma2))

    @classmethod
    def for_model(cls, model: SplitVectorModel, mu: Optional[float] = None, sigma2: Optional[float] = None):
        """Refuses lattice models: the limit theorem needs -ln V non-lattice."""
        if model.lattice:
            raise ValueError(f"{model.name}: -ln V is lattice, the limit law does not apply")
        if mu is None or sigma2 is None:
            from .constants import best_mu_sigma

            ms = best_mu_sigma(model)
            mu, sigma2 = ms.mu, ms.sigma2
        return cls.from_mu_sigma(mu, sigma2)

    def to_dict(self) -> dict:
        return {"mu_inv": self.mu_inv, "C": self.C, "scale": self.scale, "beta": 1, "alpha": 1}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    # ------------------------------------------------------------------

    def cf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-self.scale * np.abs(t) + 1j * (self.C * t - self.mu_inv * _t_log_abs_t(t)))
        return out if out.ndim else complex(out)

    def levy_cf(self, t: float) -> complex:
        """CF from the Levy-Khintchine form with density m/x^2 on (0, inf), by quadrature."""
        m = self.mu_inv
        if t == 0:
            return 1.0 + 0j
        opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
        # real part: int_0^inf (cos tx - 1) m / x^2 dx
        re0, _ = integrate.quad(lambda x: (math.cos(t * x) - 1) / (x * x) if x > 0 else -t * t / 2, 0, 1, **opts)
        re1, _ = integrate.quad(lambda x: 1 / (x * x), 1, np.inf, weight="cos", wvar=t)
        re = m * (re0 + re1 - 1.0)
        # imaginary part: int_0^1 (sin tx - tx) m / x^2 dx + int_1^inf sin(tx) m / x^2 dx
        im0, _ = integrate.quad(lambda x: (math.sin(t * x) - t * x) / (x * x) if x > 0 else 0.0, 0, 1, **opts)
        im1, _ = integrate.quad(lambda x: 1 / (x * x), 1, np.inf, weight="sin", wvar=t)
        im = m * (im0 + im1) + t * (self.C + m * (EULER_GAMMA - 1))
        return complex(np.exp(re + 1j * im))

    # ------------------------------------------------------------------
    # inversion

    def _horizon(self, tol: float) -> float:
        # integrand envelope exp(-c t)/t below tol beyond this point
        return max(1.0, -math.log(tol * self.scale) / self.scale) + 1.0

    def cdf(self, x: float, tol: float = 1e-10) -> float:
        """F(x) = 1/2 + (1/pi) int_0^inf e^{-ct} sin(t y + m t ln t) / t dt, y = x - C."""
        if not tol > 0:
            raise ValueError("tolerance must be positive")
        y = float(x) - self.C
        c, m = self.scale, self.mu_inv
        T = self._horizon(tol)
        if abs(y) * T < 400:
            # on (0, 1] substitute t = e^{-u}: the integrand there behaves like y + m ln t
            f = lambda t: math.exp(-c * t) * math.sin(t * y + m * t * math.log(t)) / t  # noqa: E731
            fu = lambda u: math.exp(-c * math.exp(-u)) * math.sin(math.exp(-u) * (y - m * u))  # noqa: E731
            t0 = min(1.0, T / 2)
            v1, e1 = integrate.quad(fu, -math.log(t0), np.inf, epsabs=tol / 2, epsrel=tol, limit=2000)
            v2, e2 = integrate.quad(f, t0, T, epsabs=tol / 2, epsrel=tol, limit=2000)
            val, err = v1 + v2, e1 + e2
        else:
            val, err = self._cdf_oscillatory(y, tol)
        if not err < 1e3 * tol + 1e-8:
            raise ConvergenceError(f"cdf inversion at x={x}: error estimate {err:.3g}")
        return min(1.0, max(0.0, 0.5 + val / math.pi))

    def _cdf_oscillatory(self, y: float, tol: float):
        # sin(ty + g) = sin(ty) cos g + cos(ty) sin g with g = m t ln t. The parts e^{-ct} sin(ty)/t and
        # m ln t e^{-ct} cos(ty) integrate in closed form; the remainders are smooth at 0.
        c, m = self.scale, self.mu_inv
        z = complex(c, -y)
        lead = math.atan2(y, c) + m * ((special.digamma(1.0) - np.log(z)) / z).real
        g = lambda t: m * t * math.log(t) if t > 0 else 0.0  # noqa: E731
        r1 = lambda t: math.exp(-c * t) * (math.cos(g(t)) - 1.0) / t if t > 0 else 0.0  # noqa: E731
        r2 = lambda t: math.exp(-c * t) * (math.sin(g(t)) - g(t)) / t if t > 0 else 0.0  # noqa: E731
        a, e1 = _fourier_quad(r1, "sin", y, tol)
        b, e2 = _fourier_quad(r2, "cos", y, tol)
        return lead + a + b, e1 + e2

    def pdf(self, x: float, tol: float = 1e-10) -> float:
        """f(x) = (1/pi) int_0^inf e^{-ct} cos(t y + m t ln t) dt, y = x - C."""
        if not tol > 0:
            raise ValueError("tolerance must be positive")
        y = float(x) - self.C
        c, m = self.scale, self.mu_inv
        T = self._horizon(tol)
        g = lambda t: m * t * math.log(t) if t > 0 else 0.0  # noqa: E731
        if abs(y) * T < 400:
            val, err = integrate.quad(
                lambda t: math.exp(-c * t) * math.cos(t * y + g(t)), 0, T, epsabs=tol, epsrel=tol, limit=2000
            )
        else:
            val, err = self._pdf_oscillatory(y, tol)
        if not err < 1e3 * tol + 1e-8:
            raise ConvergenceError(f"pdf inversion at x={x}: error estimate {err:.3g}")
        return max(0.0, val / math.pi)

    def _pdf_oscillatory(self, y: float, tol: float):
        # e^{-ct} cos g = e^{-ct} + r1 and e^{-ct} sin g = m e^{-ct} t ln t + r2; the leading parts
        # have closed-form transforms and carry the 1/y^2 tail, r1 and r2 are O(t^2 ln^2 t) at 0
        c, m = self.scale, self.mu_inv
        z = complex(c, -y)
        lead_cos = c / (c * c + y * y)
        lead_sin = m * ((special.digamma(2.0) - np.log(z)) / z**2).imag
        g = lambda t: m * t * math.log(t) if t > 0 else 0.0  # noqa: E731
        r1 = lambda t: math.exp(-c * t) * (math.cos(g(t)) - 1.0)  # noqa: E731
        r2 = lambda t: math.exp(-c * t) * (math.sin(g(t)) - g(t))  # noqa: E731
        a, e1 = _fourier_quad(r1, "cos", y, tol)
        b, e2 = _fourier_quad(r2, "sin", y, tol)
        return lead_cos + a - lead_sin - b, e1 + e2

    def quantile(self, p: float, tol: float = 1e-10) -> float:
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        f = lambda x: self.cdf(x, tol) - p  # noqa: E731
        lo, hi = self.C - self.scale, self.C + self.scale
        while f(lo) > 0:
            lo -= 2 * (hi - lo)
        while f(hi) < 0:
            hi += 2 * (hi - lo)
        return optimize.brentq(f, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=500)

    def cdf_interpolant(self, lo_sd: float = -12.0, hi_sd: float = 2e4, nodes: int = 4000):
        """Vectorized CDF: monotone interpolation in asinh((x - C)/c), exact inversion outside the grid."""
        z = np.linspace(math.asinh(lo_sd), math.asinh(hi_sd), nodes)
        xs = self.C + self.scale * np.sinh(z)
        fs = np.maximum.accumulate(np.array([self.cdf(x) for x in xs]))
        spline = interpolate.PchipInterpolator(z, fs)

        def F(x):
            x = np.asarray(x, dtype=float)
            zz = np.arcsinh((x - self.C) / self.scale)
            out = spline(np.clip(zz, z[0], z[-1]))
            outside = (zz < z[0]) | (zz > z[-1])
            if np.any(outside):
                out = np.array(out, copy=True)
                out[outside] = [self.cdf(v) for v in x[outside]]
            return out

        return F

    # ------------------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Chambers-Mallows-Stuck draws for index 1, beta = 1, then scale and location."""
        u = rng.uniform(-math.pi / 2, math.pi / 2, size)
        e = rng.standard_exponential(size)
        half = math.pi / 2
        x = (2 / math.pi) * ((half + u) * np.tan(u) - np.log(half * e * np.cos(u) / (half + u)))
        c = self.scale
        return c * x + (2 / math.pi) * c * math.log(c) + self.C

    def write_table(self, fh: TextIO, xs, tol: float = 1e-10) -> None:
        w = csv.writer(fh)
        w.writerow(["x", "cdf", "pdf"])
        for x in xs:
            w.writerow([repr(float(x)), repr(self.cdf(x, tol)), repr(self.pdf(x, tol))])


# ----------------------------------------------------------------------------
# normalization of record counts


@dataclass(frozen=True)
class NormalizationContext:
    n: int
    alpha: float
    mu: float
    zeta: float

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3 so that ln ln n is defined and positive")
        if not (self.alpha > 0 and self.mu > 0):
            raise ValueError("alpha and mu must be positive")

    @classmethod
    def from_constants(cls, n: int, const) -> "NormalizationContext":
        return cls(n, const.alpha, const.mu, const.zeta)


def normalization_C_n(ctx: NormalizationContext) -> float:
    n, a, m, z = ctx.n, ctx.alpha, 1.0 / ctx.mu, ctx.zeta
    L = math.log(n)
    return a * n / (m * L) + a * n * math.log(L) / (m * L * L) - z * n / (m * L * L)


def normalization_scale(ctx: NormalizationContext) -> float:
    """alpha n / (mu^-2 ln^2 n)."""
    L = math.log(ctx.n)
    return ctx.alpha * ctx.n * ctx.mu**2 / (L * L)


def normalize(X, ctx: NormalizationContext):
    """(X - C_n) / (alpha n / (mu^-2 ln^2 n)); converges in law to -W."""
    return (np.asarray(X, dtype=float) - normalization_C_n(ctx)) / normalization_scale(ctx)
