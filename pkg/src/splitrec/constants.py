"""The constants mu, sigma^2, alpha, varsigma, zeta and the renewal functions U and W."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .errors import CapabilityError, ConvergenceError
from .models import BinarySearchTree, PermutedFixed, SplitParams, SplitVectorModel, Symmetric
from .streams import master_from, stream
from .tree import generate_tree, summarize

EULER_GAMMA = float(np.euler_gamma)
MAX_TERMS = 100_000


@dataclass(frozen=True)
class MuSigma:
    mu: float
    sigma2: float
    method: str
    mu_se: Optional[float] = None
    sigma2_se: Optional[float] = None


def mu_sigma(
    model: SplitVectorModel,
    method: Literal["analytic", "quadrature", "monte_carlo"] = "analytic",
    reps: int = 1_000_000,
    rng: np.random.Generator | int | None = 0,
) -> MuSigma:
    """mu = b E(-V ln V) and sigma^2 = b E(V ln^2 V) - mu^2."""
    b = model.b
    if method == "analytic":
        out = model.analytic_mu_sigma2()
        if out is None:
            raise CapabilityError(f"{model.name} has no closed-form mu, sigma^2")
        return MuSigma(out[0], out[1], "analytic")
    if method == "quadrature":
        f = model.density()
        if f is None:
            raise CapabilityError(f"{model.name} has no component density; quadrature unavailable")
        opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
        m1, _ = integrate.quad(lambda v: -v * math.log(v) * float(f(v)) if v > 0 else 0.0, 0.0, 1.0, **opts)
        m2, _ = integrate.quad(lambda v: v * math.log(v) ** 2 * float(f(v)) if v > 0 else 0.0, 0.0, 1.0, **opts)
        mu = b * m1
        return MuSigma(mu, b * m2 - mu * mu, "quadrature")
    if method == "monte_carlo":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        v = model.sample(rng, reps)
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), 0.0)
        x = np.sum(-v * lv, axis=1)  # per-vector unbiased for mu
        y = np.sum(v * lv**2, axis=1)  # per-vector unbiased for mu^2 + sigma^2
        mu = float(x.mean())
        sigma2 = float(y.mean() - mu * mu)
        cov = np.cov(np.vstack([x, y])) / reps
        # delta method for sigma^2 = E y - (E x)^2
        grad = np.array([-2.0 * mu, 1.0])
        return MuSigma(
            mu,
            sigma2,
            "monte_carlo",
            mu_se=float(math.sqrt(cov[0, 0])),
            sigma2_se=float(math.sqrt(max(grad @ cov @ grad, 0.0))),
        )
    raise ValueError(f"unknown method {method!r}")


def best_mu_sigma(model: SplitVectorModel) -> MuSigma:
    for method in ("analytic", "quadrature"):
        try:
            return mu_sigma(model, method)
        except CapabilityError:
            pass
    return mu_sigma(model, "monte_carlo")


# ----------------------------------------------------------------------------
# node count and path length constants


@dataclass(frozen=True)
class Ensemble:
    """Per-replicate N, Psi and Upsilon for each ball count of a grid."""

    n_grid: tuple[int, ...]
    N: dict
    psi: dict
    upsilon: dict


def tree_ensemble(params: SplitParams, n_grid: Sequence[int], reps: int, rng=None) -> Ensemble:
    master = master_from(rng)
    N, psi, ups = {}, {}, {}
    for n in n_grid:
        a = np.empty((3, reps), dtype=np.int64)
        for r in range(reps):
            sm = summarize(generate_tree(params, n, stream(master, n, r)))
            a[:, r] = sm.N, sm.psi, sm.upsilon
        N[n], psi[n], ups[n] = a
    return Ensemble(tuple(n_grid), N, psi, ups)


@dataclass(frozen=True)
class AlphaEstimate:
    n_grid: tuple[int, ...]
    ratio: np.ndarray  # mean N / n
    ratio_se: np.ndarray
    var_ratio: np.ndarray  # sample Var(N) / n^2

    @property
    def alpha(self) -> float:
        return float(self.ratio[-1])

    @property
    def alpha_se(self) -> float:
        return float(self.ratio_se[-1])


def estimate_alpha(
    params: SplitParams, n_grid: Sequence[int], reps: int, rng=None, ensemble: Ensemble | None = None
) -> AlphaEstimate:
    if reps < 2:
        raise ValueError("need reps >= 2")
    if any(b < a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be nondecreasing")
    ens = ensemble or tree_ensemble(params, n_grid, reps, rng)
    ratio, se, vr = [], [], []
    for n in n_grid:
        x = ens.N[n] / n
        ratio.append(x.mean())
        se.append(x.std(ddof=1) / math.sqrt(len(x)))
        vr.append(x.var(ddof=1))
    return AlphaEstimate(tuple(n_grid), np.array(ratio), np.array(se), np.array(vr))


@dataclass(frozen=True)
class PathConstants:
    n_grid: tuple[int, ...]
    q: np.ndarray  # (mean Psi - n ln n / mu) / n
    q_se: np.ndarray
    r: np.ndarray  # (mean Upsilon - alpha n ln n / mu) / n
    r_se: np.ndarray
    extrapolated: bool = False

    @property
    def varsigma(self) -> float:
        return self._last(self.q)

    @property
    def zeta(self) -> float:
        return self._last(self.r)

    @property
    def varsigma_se(self) -> float:
        return float(self.q_se[-1])

    @property
    def zeta_se(self) -> float:
        return float(self.r_se[-1])

    def _last(self, a):
        if self.extrapolated and len(a) >= 2:
            # Richardson step assuming an O(1/n) remainder and a doubling grid
            return float(2 * a[-1] - a[-2])
        return float(a[-1])


def estimate_path_constants(
    params: SplitParams,
    mu: float,
    alpha: float,
    n_grid: Sequence[int],
    reps: int,
    rng=None,
    ensemble: Ensemble | None = None,
    extrapolate: bool = False,
) -> PathConstants:
    ens = ensemble or tree_ensemble(params, n_grid, reps, rng)
    q, qse, r, rse = [], [], [], []
    for n in n_grid:
        lead = n * math.log(n) / mu
        qs = (ens.psi[n] - lead) / n
        rs = (ens.upsilon[n] - alpha * lead) / n
        q.append(qs.mean())
        qse.append(qs.std(ddof=1) / math.sqrt(len(qs)))
        r.append(rs.mean())
        rse.append(rs.std(ddof=1) / math.sqrt(len(rs)))
    return PathConstants(tuple(n_grid), np.array(q), np.array(qse), np.array(r), np.array(rse), extrapolate)


# ----------------------------------------------------------------------------
# renewal function U(t) = sum_k b^k P(Y_k <= t), Y_k a sum of k copies of -ln V


@dataclass(frozen=True)
class RenewalEvaluation:
    t: float
    U: float
    K: int
    tail_bound: float
    chernoff_s: float
    method: str
    se: float = 0.0


def _moment(model: SplitVectorModel, s: float) -> float:
    m = model.moment(s)
    if m is not None:
        return m
    v = model.sample(np.random.default_rng(12345), 200_000)
    return float(np.mean(v**s))


def chernoff_cutoff(model: SplitVectorModel, t: float, tol: float, s_max: float = 12.0) -> tuple[int, float, float]:
    """Smallest K with sum_{k>K} b^k E(V^s)^k e^{st} <= tol * e^t, s optimized on (1, s_max].

    Returns (K, s, tail_bound).
    """
    b = model.b
    target = tol * math.exp(t)

    def terms_needed(s):
        r = b * _moment(model, s)
        if not r < 1.0:
            return math.inf
        need = (math.log(target * (1.0 - r)) - s * t) / math.log(r)
        return max(need - 1.0, 1.0)

    res = optimize.minimize_scalar(
        lambda x: min(terms_needed(x), 1e300), bounds=(1.0 + 1e-6, s_max), method="bounded", options={"xatol": 1e-10}
    )
    s = float(res.x)
    K = terms_needed(s)
    if not math.isfinite(K) or K > MAX_TERMS:
        raise ConvergenceError(f"no Chernoff cutoff below {MAX_TERMS} terms for t={t}, tol={tol}")
    K = int(math.ceil(K))
    r = b * _moment(model, s)
    bound = math.exp(s * t) * r ** (K + 1) / (1.0 - r)
    return K, s, bound


def _discrete_y_law(p: Sequence[float], K: int):
    """Atoms of Y_1..Y_K for -ln V taking values -ln p_i with probability 1/b each."""
    steps = -np.log(np.asarray(p))
    b = len(steps)
    vals = np.array([0.0])
    probs = np.array([1.0])
    out = []
    for _ in range(K):
        v = (vals[:, None] + steps[None, :]).ravel()
        w = np.repeat(probs / b, b)
        key = np.round(v, 11)
        uniq, inv = np.unique(key, return_inverse=True)
        probs = np.bincount(inv, weights=w)
        vals = np.bincount(inv, weights=v) / np.bincount(inv)
        out.append((vals, probs))
    return out


def _analytic_terms(model: SplitVectorModel, t: float, K: int) -> np.ndarray:
    """b^k P(Y_k <= t) for k = 1..K, when the law of Y_k is known."""
    b = model.b
    k = np.arange(1, K + 1)
    if isinstance(model, BinarySearchTree):
        # -ln U ~ Exp(1) so Y_k ~ Gamma(k, 1)
        if t <= 0:
            return np.zeros(K)
        return np.exp(k * math.log(b) + stats.gamma.logcdf(t, k))
    if isinstance(model, (PermutedFixed, Symmetric)):
        p = model.p if isinstance(model, PermutedFixed) else (1.0 / model.b,) * model.b
        law = _discrete_y_law(p, K)
        return np.array([b**j * probs[vals <= t + 1e-12].sum() for j, (vals, probs) in zip(k, law)])
    raise CapabilityError(f"law of Y_k unknown for {model.name}; use method='series_mc'")


def size_biased_steps(model: SplitVectorModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """-ln V_I where the component I is picked with probability V_I (the tilted step law)."""
    v = model.sample(rng, size)
    cum = np.cumsum(v, axis=1)
    u = rng.random(size) * cum[:, -1]
    idx = (cum < u[:, None]).sum(axis=1)
    idx = np.minimum(idx, v.shape[1] - 1)
    return -np.log(v[np.arange(size), idx])


def _tilted_walks(model, x, K, reps, rng):
    """Per-walk sums over renewal epochs Y_k <= x (k <= K) of e^{Y_k - x} and of 1 - e^{Y_k - x}.

    Under the tilt Q(dy) = b e^{-y} P(-ln V in dy), b^k P(Y_k <= x) = E_Q[e^{Y_k}; Y_k <= x].
    """
    pos = np.zeros(reps)
    s_u = np.zeros(reps)
    s_w = np.zeros(reps)
    active = np.arange(reps)
    for _ in range(K):
        if active.size == 0:
            break
        pos[active] += size_biased_steps(model, rng, active.size)
        ok = pos[active] <= x
        active = active[ok]
        e = np.exp(pos[active] - x)
        s_u[active] += e
        s_w[active] += 1.0 - e
    return s_u, s_w


def renewal_U(
    model: SplitVectorModel,
    t: float,
    tol: float = 1e-9,
    method: Literal["series_analytic", "series_mc"] = "series_analytic",
    reps: int = 200_000,
    rng: np.random.Generator | int | None = 0,
) -> RenewalEvaluation:
    """U(t) = sum_{k>=1} b^k P(Y_k <= t), truncated at a Chernoff cutoff K.

    ``tol`` bounds the neglected tail relative to e^t, i.e. it is an absolute
    tolerance on e^{-t} U(t). ``series_mc`` estimates the terms with
    size-biased random walks and reports a standard error.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return RenewalEvaluation(0.0, 0.0, 0, 0.0, float("nan"), method)
    K, s, bound = chernoff_cutoff(model, t, tol)
    if method == "series_analytic":
        U = float(np.sum(_analytic_terms(model, t, K)))
        return RenewalEvaluation(float(t), U, K, bound, s, method)
    if method == "series_mc":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        s_u, _ = _tilted_walks(model, t, K, reps, rng)
        scale = math.exp(t)
        return RenewalEvaluation(
            float(t), scale * float(s_u.mean()), K, bound, s, method, se=scale * float(s_u.std(ddof=1) / math.sqrt(reps))
        )
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class WEvaluation:
    x: float
    W: float
    se: float = 0.0


def renewal_W(
    model: SplitVectorModel,
    x: float,
    tol: float = 1e-9,
    method: Literal["series_analytic", "series_mc"] = "series_analytic",
    mu: Optional[float] = None,
    reps: int = 200_000,
    rng: np.random.Generator | int | None = 0,
) -> WEvaluation:
    """W(x) = int_0^x e^{-t} (U(t) - e^t / mu) dt."""
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0:
        return WEvaluation(0.0, 0.0)
    if mu is None:
        mu = best_mu_sigma(model).mu
    if method == "series_mc":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        K, _, _ = chernoff_cutoff(model, x, tol)
        _, s_w = _tilted_walks(model, x, K, reps, rng)
        return WEvaluation(float(x), float(s_w.mean()) - x / mu, float(s_w.std(ddof=1) / math.sqrt(reps)))
    if method != "series_analytic":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(model, (PermutedFixed, Symmetric)):
        # U is a step function: integrate each atom exactly
        K, _, _ = chernoff_cutoff(model, x, tol)
        p = model.p if isinstance(model, PermutedFixed) else (1.0 / model.b,) * model.b
        b = model.b
        total = 0.0
        for j, (vals, probs) in enumerate(_discrete_y_law(p, K), start=1):
            m = vals <= x + 1e-12
            total += b**j * float(np.sum(probs[m] * (np.exp(-vals[m]) - math.exp(-x))))
        return WEvaluation(float(x), total - x / mu)

    def integrand(t):
        return math.exp(-t) * renewal_U(model, t, tol, "series_analytic").U - 1.0 / mu

    val, _ = integrate.quad(integrand, 0.0, x, epsabs=1e-10, epsrel=1e-10, limit=200)
    return WEvaluation(float(x), val)


def w_limit(mu: float, sigma2: float) -> float:
    """Limit of W(x) as x -> infinity: (sigma^2 - mu^2) / (2 mu^2) - 1/mu."""
    return (sigma2 - mu * mu) / (2 * mu * mu) - 1.0 / mu


# ----------------------------------------------------------------------------


@dataclass
class LimitConstants:
    mu: float
    sigma2: float
    alpha: float
    varsigma: float
    zeta: float
    C: float
    provenance: dict = field(default_factory=dict)
    model: str = ""
    b: int = 0
    s: int = 0
    s0: int = 0
    s1: int = 0

    @property
    def mu_inv(self) -> float:
        return 1.0 / self.mu

    def to_json(self) -> str:
        d = asdict(self)
        order = ["model", "b", "s", "s0", "s1", "mu", "sigma2", "alpha", "varsigma", "zeta", "C", "provenance"]
        return json.dumps({k: d[k] for k in order}, indent=2)


def bst_constants() -> LimitConstants:
    """Exact constants for the binary search tree (alpha = 1, varsigma = zeta = 2 gamma - 4)."""
    from .stable import constant_C

    zeta = 2 * EULER_GAMMA - 4
    p = {k: "analytic" for k in ("mu", "sigma2", "alpha", "varsigma", "zeta", "C")}
    return LimitConstants(0.5, 0.25, 1.0, zeta, zeta, constant_C(0.5, 0.25), p, "bst", 2, 1, 1, 0)


def compute_constants(
    params: SplitParams, n_grid: Sequence[int] = (1000, 2000, 4000), reps: int = 200, rng=None
) -> LimitConstants:
    """All constants; mu/sigma^2 analytically when possible, alpha/varsigma/zeta estimated."""
    from .stable import constant_C

    if isinstance(params.model, BinarySearchTree) and (params.s, params.s0, params.s1) == (1, 1, 0):
        return bst_constants()
    ms = best_mu_sigma(params.model)
    ens = tree_ensemble(params, n_grid, reps, rng)
    al = estimate_alpha(params, n_grid, reps, ensemble=ens)
    pc = estimate_path_constants(params, ms.mu, al.alpha, n_grid, reps, ensemble=ens)
    est = lambda se: f"estimated(SE={se:.3g})"  # noqa: E731
    prov = {
        "mu": ms.method if ms.mu_se is None else est(ms.mu_se),
        "sigma2": ms.method if ms.sigma2_se is None else est(ms.sigma2_se),
        "alpha": est(al.alpha_se),
        "varsigma": est(pc.varsigma_se),
        "zeta": est(pc.zeta_se),
        "C": "derived(mu, sigma2)",
    }
    return LimitConstants(
        ms.mu, ms.sigma2, al.alpha, pc.varsigma, pc.zeta, constant_C(ms.mu, ms.sigma2), prov,
        params.model.to_spec(), params.b, params.s, params.s0, params.s1,
    )
