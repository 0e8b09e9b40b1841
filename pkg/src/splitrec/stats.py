"""Kolmogorov-Smirnov helpers, empirical CFs, depth-law checks and the experiment runner."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TextIO

import numpy as np
from scipy import special

from .constants import LimitConstants, bst_constants, compute_constants
from .errors import CapabilityError
from .models import BinarySearchTree, SplitParams
from .records import count_records_edges, count_records_vertices, simulate_cuts_edges, simulate_cuts_vertices
from .stable import LimitDistribution, NormalizationContext, normalize
from .streams import stream
from .tree import generate_tree, sample_last_depth, summarize

TARGETS = ("records_v", "records_e", "cuts_v", "cuts_e", "depths", "summaries")


def ks_one_sample(sample, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup_x |F_n(x) - F(x)| for a continuous reference CDF (vectorized)."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS distance with the asymptotic Kolmogorov p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    d = float(np.max(np.abs(np.searchsorted(a, grid, "right") / a.size - np.searchsorted(b, grid, "right") / b.size)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return d, float(special.kolmogorov(d * en)) if d > 0 else 1.0


def empirical_cf(sample, t_grid) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    return np.array([np.mean(np.exp(1j * tt * x)) for tt in t])


# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DepthCheck:
    n: int
    depths: np.ndarray
    standardized: np.ndarray
    ks: float
    mean: float
    mean_se: float
    var_over_log: float


def last_ball_depths(params: SplitParams, n: int, reps: int, master_seed: int, method: str = "spine") -> np.ndarray:
    """D_n for ``reps`` independent trees; ``full`` grows every tree, ``spine`` follows the last ball only."""
    if method == "full":
        return np.array([generate_tree(params, n, stream(master_seed, n, r)).insertion_depths[-1] for r in range(reps)])
    if method == "spine":
        return np.array([sample_last_depth(params, n, stream(master_seed, n, r)) for r in range(reps)])
    raise ValueError(f"unknown method {method!r}")


def depth_clt_check(
    params: SplitParams, n: int, reps: int, mu: float, sigma2: float, master_seed: int = 0, method: str = "spine"
) -> DepthCheck:
    """KS distance of (D_n - ln n / mu) / sqrt(sigma^2 mu^-3 ln n) to the standard normal."""
    if sigma2 <= 0:
        raise CapabilityError("sigma^2 = 0 (V is monoatomic): no Gaussian depth fluctuations")
    d = last_ball_depths(params, n, reps, master_seed, method).astype(float)
    L = math.log(n)
    z = (d - L / mu) / math.sqrt(sigma2 * L / mu**3)
    ks = ks_one_sample(z, lambda x: special.ndtr(x))
    return DepthCheck(n, d, z, ks, float(d.mean()), float(d.std(ddof=1) / math.sqrt(reps)), float(d.var(ddof=1) / L))


# ----------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    params: SplitParams
    n_grid: tuple[int, ...]
    reps: int
    master_seed: int = 0
    targets: tuple[str, ...] = ("records_v",)
    constants: Optional[LimitConstants] = None
    threads: Optional[int] = None

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.targets = tuple(self.targets)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        bad = set(self.targets) - set(TARGETS)
        if bad:
            raise ValueError(f"unknown targets {sorted(bad)}")


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    samples: dict  # (n, target) -> array of length reps
    failures: list  # (n, replicate, message)
    constants: Optional[LimitConstants]
    ks_limit: dict = field(default_factory=dict)  # (n, target) -> KS of -normalize(X) vs W
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        cfg = self.config
        stats_out = []
        for (n, target), arr in sorted(self.samples.items()):
            a = np.asarray(arr, dtype=float)
            ok = a[np.isfinite(a)]
            entry = {
                "n": n,
                "target": target,
                "count": int(ok.size),
                "mean": float(ok.mean()) if ok.size else None,
                "sd": float(ok.std(ddof=1)) if ok.size > 1 else None,
                "median": float(np.median(ok)) if ok.size else None,
            }
            if (n, target) in self.ks_limit:
                entry["ks_vs_limit"] = self.ks_limit[(n, target)]
            stats_out.append(entry)
        out = {
            "config": {
                **cfg.params.as_dict(),
                "n_grid": list(cfg.n_grid),
                "reps": cfg.reps,
                "master_seed": cfg.master_seed,
                "targets": list(cfg.targets),
            },
            "constants": None if self.constants is None else json.loads(self.constants.to_json()),
            "statistics": stats_out,
            "failures": [{"n": n, "replicate": r, "error": m} for n, r, m in self.failures],
        }
        if include_timing:
            out["timing"] = self.timing
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2)

    def write_samples_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh)
        w.writerow(["n", "replicate", "target", "value"])
        for (n, target), arr in sorted(self.samples.items()):
            for r, v in enumerate(arr):
                w.writerow([n, r, target, repr(float(v))])


def _replicate(params: SplitParams, n: int, r: int, master: int, targets: Sequence[str]) -> dict:
    rng = stream(master, n, r)
    tree = generate_tree(params, n, rng)
    out = {}
    for t in targets:
        if t == "records_v":
            out[t] = count_records_vertices(tree, rng)
        elif t == "records_e":
            out[t] = count_records_edges(tree, rng)
        elif t == "cuts_v":
            out[t] = simulate_cuts_vertices(tree, rng).count
        elif t == "cuts_e":
            out[t] = simulate_cuts_edges(tree, rng).count
        elif t == "depths":
            out[t] = int(tree.insertion_depths[-1])
        elif t == "summaries":
            sm = summarize(tree)
            out.update({"N": sm.N, "height": sm.height, "psi": sm.psi, "upsilon": sm.upsilon})
    return out


def _keys(targets):
    keys = []
    for t in targets:
        keys.extend(["N", "height", "psi", "upsilon"] if t == "summaries" else [t])
    return keys


def default_constants(params: SplitParams) -> Optional[LimitConstants]:
    if isinstance(params.model, BinarySearchTree) and (params.s, params.s0, params.s1) == (1, 1, 0):
        return bst_constants()
    return None


def run_experiment(config: ExperimentConfig, progress: Optional[Callable[[int, int], None]] = None) -> ExperimentReport:
    """Evaluate every target on ``reps`` trees per ball count.

    Replicate (n, r) draws everything from the keyed stream (master_seed, n, r),
    so results do not depend on thread count or scheduling.
    """
    t0 = time.perf_counter()
    threads = config.threads or int(os.environ.get("SPLITREC_THREADS", 0)) or os.cpu_count() or 1
    keys = _keys(config.targets)
    samples = {(n, k): np.full(config.reps, np.nan) for n in config.n_grid for k in keys}
    failures = []
    timing = {}

    def job(n, r):
        try:
            return n, r, _replicate(config.params, n, r, config.master_seed, config.targets), None
        except Exception as exc:  # recorded per replicate
            return n, r, None, f"{type(exc).__name__}: {exc}"

    for n in config.n_grid:
        tn = time.perf_counter()
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: job(n, r), range(config.reps)))
        for _, r, vals, err in results:
            if err is not None:
                failures.append((n, r, err))
                continue
            for k in keys:
                samples[(n, k)][r] = vals[k]
        timing[str(n)] = time.perf_counter() - tn
        if progress:
            progress(n, config.reps)

    consts = config.constants or default_constants(config.params)
    ks = {}
    if consts is not None and not config.params.model.lattice:
        dist = LimitDistribution.from_mu_sigma(consts.mu, consts.sigma2)
        cdf = np.vectorize(dist.cdf)
        for n in config.n_grid:
            if n < 3:
                continue
            ctx = NormalizationContext.from_constants(n, consts)
            for k in ("records_v", "records_e", "cuts_v", "cuts_e"):
                if (n, k) in samples:
                    x = samples[(n, k)]
                    x = x[np.isfinite(x)]
                    if x.size:
                        ks[(n, k)] = ks_one_sample(-normalize(x, ctx), cdf)
    timing["total"] = time.perf_counter() - t0
    return ExperimentReport(config, samples, failures, consts, ks, timing)
