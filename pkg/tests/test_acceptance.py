"""Exit criteria, each at its stated tolerance; one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v -s`` (the lines are also
repeated in the terminal summary).
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from splitrec import constants as K
from splitrec.models import BinarySearchTree, bst_params, parse_model
from splitrec.records import (
    brute_force_mean_records,
    capped_record_count,
    conditional_expected_records,
    count_records_edges,
    count_records_vertices,
    expected_records_edges,
    expected_records_vertices,
    simulate_cuts_edges,
    simulate_cuts_vertices,
)
from splitrec.stable import LimitDistribution, constant_C, stable1_cf
from splitrec.stats import (
    ExperimentConfig,
    depth_clt_check,
    empirical_cf,
    ks_one_sample,
    ks_two_sample,
    run_experiment,
)
from splitrec.streams import stream
from splitrec.tree import SplitTree, generate_tree

import oracles

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def verdict(report_line, k: int, title: str, checks: list, t0: float) -> None:
    """checks: (description, passed) pairs. Emits one line and asserts all passed."""
    ok = all(p for _, p in checks)
    detail = "; ".join(f"{d} [{'ok' if p else 'FAIL'}]" for d, p in checks)
    report_line(f"criterion {k} {'PASS' if ok else 'FAIL'} ({title}, {time.perf_counter() - t0:.0f}s): {detail}")
    assert ok, detail


def test_criterion_1_exact_identities(report_line):
    t0 = time.perf_counter()
    corpus = [shape for n in range(1, 6) for shape in oracles.all_rooted_shapes(n)]
    rng = np.random.default_rng(1)
    while len(corpus) < 110:
        n = int(rng.integers(6, 8))
        corpus.append(tuple([-1] + [int(rng.integers(0, i)) for i in range(1, n)]))
    worst_v = worst_e = 0.0
    for parents in corpus:
        tree = SplitTree.from_parents(parents)
        bv = brute_force_mean_records(tree, "vertex")
        be = brute_force_mean_records(tree, "edge")
        d = [int(x) for x in tree.depth]
        exact_v = sum(Fraction(1, x + 1) for x in d)
        exact_e = sum(Fraction(1, x) for x in d[1:])
        assert bv == exact_v and be == exact_e
        worst_v = max(worst_v, abs(float(bv) - expected_records_vertices(tree)))
        worst_e = max(worst_e, abs(float(be) - expected_records_edges(tree)))
    elapsed = time.perf_counter() - t0
    verdict(report_line, 1, f"{len(corpus)} trees <= 7 nodes", [
        (f"max |brute X_v - sum 1/(d+1)| = {worst_v:.1e} < 1e-12", worst_v < 1e-12),
        (f"max |brute X_e - sum 1/d| = {worst_e:.1e} < 1e-12", worst_e < 1e-12),
        (f"corpus size {len(corpus)} >= 100", len(corpus) >= 100),
        (f"runtime {elapsed:.1f}s < 60s", elapsed < 60),
    ], t0)


def test_criterion_2_bst_constants(report_line):
    t0 = time.perf_counter()
    q = K.mu_sigma(BinarySearchTree(), "quadrature")
    verdict(report_line, 2, "BST mu, sigma^2 by quadrature", [
        (f"|mu - 1/2| = {abs(q.mu - 0.5):.1e} < 1e-8", abs(q.mu - 0.5) < 1e-8),
        (f"|sigma^2 - 1/4| = {abs(q.sigma2 - 0.25):.1e} < 1e-8", abs(q.sigma2 - 0.25) < 1e-8),
    ], t0)


def test_criterion_3_renewal(report_line):
    t0 = time.perf_counter()
    model = BinarySearchTree()
    ts = range(1, 11)
    rel_a = max(abs(K.renewal_U(model, t).U / oracles.bst_U(t) - 1) for t in ts)
    rel_mc = max(
        abs(K.renewal_U(model, t, method="series_mc", reps=200_000, rng=stream(3, t)).U / oracles.bst_U(t) - 1) for t in ts
    )
    w_a = K.renewal_W(model, 10.0).W
    w_mc = K.renewal_W(model, 10.0, method="series_mc", reps=200_000, rng=stream(3, 99)).W
    lim = K.w_limit(0.5, 0.25)
    elapsed = time.perf_counter() - t0
    verdict(report_line, 3, "BST renewal function", [
        (f"analytic max |U/2(e^t-1) - 1| = {rel_a:.1e} < 1%", rel_a < 0.01),
        (f"Monte Carlo max |U/2(e^t-1) - 1| = {rel_mc:.1e} < 1%", rel_mc < 0.01),
        (f"|W(10) + 2| = {abs(w_a + 2):.1e} (analytic), {abs(w_mc + 2):.1e} (Monte Carlo) < 0.05",
         abs(w_a + 2) < 0.05 and abs(w_mc + 2) < 0.05),
        (f"(sigma^2 - mu^2)/(2 mu^2) - 1/mu = {lim:.12g} = -2", abs(lim + 2) < 1e-12),
        (f"runtime {elapsed:.1f}s < 300s", elapsed < 300),
    ], t0)


def test_criterion_4_depth_laws(report_line):
    t0 = time.perf_counter()
    n, reps = 10**5, 10**4
    chk = depth_clt_check(bst_params(), n, reps, 0.5, 0.25, master_seed=4, method="spine")
    exact = oracles.bst_depth_mean(n)
    z = abs(chk.mean - exact) / chk.mean_se
    var_rel = abs(chk.var_over_log / 2.0 - 1)
    elapsed = time.perf_counter() - t0
    verdict(report_line, 4, f"BST n=1e5, {reps} spine-sampled depths", [
        (f"|mean - 2(H_n - 1)| = {z:.2f} SE < 3", z < 3),
        (f"KS vs N(0,1) = {chk.ks:.4f} < 0.05", chk.ks < 0.05),
        (f"Var/ln n = {chk.var_over_log:.4f}, {100 * var_rel:.1f}% from 2 < 15%", var_rel < 0.15),
        (f"runtime {elapsed:.1f}s < 600s", elapsed < 600),
    ], t0)


def test_criterion_5_records_equal_cuttings(report_line):
    t0 = time.perf_counter()
    n, reps, params = 500, 5000, bst_params()
    out = {}
    for key, count, master in (
        ("rv", count_records_vertices, 51),
        ("re", count_records_edges, 52),
        ("cv", lambda t, r: simulate_cuts_vertices(t, r).count, 53),
        ("ce", lambda t, r: simulate_cuts_edges(t, r).count, 54),
    ):
        vals = []
        for r in range(reps):
            rng = stream(master, n, r)
            vals.append(count(generate_tree(params, n, rng), rng))
        out[key] = np.asarray(vals)
    dv, pv = ks_two_sample(out["rv"], out["cv"])
    de, pe = ks_two_sample(out["re"], out["ce"])
    elapsed = time.perf_counter() - t0
    verdict(report_line, 5, "BST n=500, 5000 + 5000 replicates", [
        (f"vertex KS D={dv:.4f} p={pv:.3f} > 0.001", pv > 0.001),
        (f"edge KS D={de:.4f} p={pe:.3f} > 0.001", pe > 0.001),
        (f"runtime {elapsed:.1f}s < 300s", elapsed < 300),
    ], t0)


def test_criterion_6_conditional_expectation(report_line):
    t0 = time.perf_counter()
    tree = generate_tree(bst_params(), 20, 606)
    assert tree.N == 20
    reps = 100_000
    checks = []
    for k, cap in enumerate((0.1, 0.3, 1.0)):
        phi = conditional_expected_records(tree, cap)
        x = np.array([capped_record_count(tree, cap, stream(6, k, r)) for r in range(reps)], dtype=float)
        se = x.std(ddof=1) / math.sqrt(reps)
        z = abs(x.mean() - phi) / se
        checks.append((f"cap {cap}: phi={phi:.5f}, MC={x.mean():.5f}, {z:.2f} SE < 3", z < 3))
    elapsed = time.perf_counter() - t0
    checks.append((f"runtime {elapsed:.1f}s < 60s", elapsed < 60))
    verdict(report_line, 6, "20-node tree, capped labels", checks, t0)


def test_criterion_7_stable_numerics(report_line):
    t0 = time.perf_counter()
    dist = LimitDistribution.from_mu_sigma(0.5, 0.25)
    grid = np.linspace(-50, 50, 2001)
    map_err = 0.0
    for mu, s2 in ((0.5, 0.25), (5 / 6, 13 / 36), (0.3, 0.05), (1.2, 2.0)):
        d = LimitDistribution.from_mu_sigma(mu, s2)
        map_err = max(map_err, float(np.max(np.abs(stable1_cf(grid, d.scale, 1.0, d.loc) - d.cf(grid)))))
    draws = dist.sample(np.random.default_rng(77), 1_000_000)
    tg = np.concatenate([-np.linspace(0.05, 5, 50), np.linspace(0.05, 5, 50)])
    cf_err = float(np.max(np.abs(empirical_cf(draws, tg) - dist.cf(tg))))
    ks = ks_one_sample(draws, dist.cdf_interpolant())
    levy_err = max(abs(dist.levy_cf(t) - complex(dist.cf(t))) for t in (0.5, 1.0, 2.0))
    c_err = abs(constant_C(0.5, 0.25) - (3 - 2 * math.log(2) - 2 * np.euler_gamma))
    elapsed = time.perf_counter() - t0
    verdict(report_line, 7, "limit law W", [
        (f"mapping identity max CF error {map_err:.1e} < 1e-12", map_err < 1e-12),
        (f"sampler vs analytic CF max error {cf_err:.4f} < 0.01 (1e6 draws)", cf_err < 0.01),
        (f"inversion CDF vs empirical KS {ks:.5f} < 0.005", ks < 0.005),
        (f"Levy-Khintchine form vs CF max error {levy_err:.1e} < 1e-6", levy_err < 1e-6),
        (f"|C(BST) - (3 - 2 ln 2 - 2 gamma)| = {c_err:.1e} < 1e-10", c_err < 1e-10),
        (f"runtime {elapsed:.1f}s < 300s", elapsed < 300),
    ], t0)


def test_criterion_8_limit_trend(report_line):
    t0 = time.perf_counter()
    grid = (2**10, 2**14, 2**18)
    cfg = ExperimentConfig(bst_params(), grid, 2000, master_seed=8, targets=("records_v",), constants=K.bst_constants())
    rep = run_experiment(cfg)
    assert not rep.failures
    ks = [rep.ks_limit[(n, "records_v")] for n in grid]
    lead = [abs(np.mean(rep.samples[(n, "records_v")]) * 2 * math.log(n) / n - 1) for n in grid]
    elapsed = time.perf_counter() - t0
    verdict(report_line, 8, "BST n = 2^10, 2^14, 2^18, 2000 replicates", [
        ("KS vs limit " + " >= ".join(f"{x:.4f}" for x in ks) + " non-increasing", ks[0] >= ks[1] >= ks[2]),
        ("|mean X_v 2 ln n / n - 1| " + " > ".join(f"{x:.4f}" for x in lead) + " decreasing", lead[0] > lead[1] > lead[2]),
        (f"runtime {elapsed:.0f}s < 1800s", elapsed < 1800),
    ], t0)


def test_criterion_9_cross_family(report_line):
    t0 = time.perf_counter()
    params = parse_model("mary:3")  # UniformSpacings(3) with s = 2, s0 = 2, s1 = 0
    grid, reps = (32, 64, 128, 256), 50_000
    ens = K.tree_ensemble(params, grid, reps, rng=9)
    al = K.estimate_alpha(params, grid, reps, ensemble=ens)
    ms = K.mu_sigma(params.model, "quadrature")
    pc = K.estimate_path_constants(params, ms.mu, al.alpha, grid, reps, ensemble=ens)
    dq = np.abs(np.diff(pc.q))
    u = K.renewal_U(params.model, 8.0, method="series_mc", reps=400_000, rng=stream(9, 8))
    ratio = math.exp(-8) * u.U * ms.mu
    elapsed = time.perf_counter() - t0
    verdict(report_line, 9, "UniformSpacings(3), s=2, s0=2, s1=0", [
        (f"alpha-hat {al.alpha:.4f} >= 1/s = 0.5", al.alpha >= 0.5),
        ("Var(N)/n^2 " + " > ".join(f"{x:.2e}" for x in al.var_ratio) + " decreasing", bool(np.all(np.diff(al.var_ratio) < 0))),
        (f"e^-8 U(8) = {math.exp(-8) * u.U:.4f} vs 1/mu = {1 / ms.mu:.4f}, ratio {ratio:.4f} within 10%", abs(ratio - 1) < 0.1),
        ("|q(2n) - q(n)| " + " > ".join(f"{x:.4f}" for x in dq) + " decreasing", bool(np.all(np.diff(dq) < 0))),
        (f"runtime {elapsed:.0f}s < 1800s", elapsed < 1800),
    ], t0)
