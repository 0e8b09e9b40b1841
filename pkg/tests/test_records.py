import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from splitrec.models import bst_params, mary_params
from splitrec.records import (
    brute_force_mean_records,
    capped_record_count,
    conditional_expected_records,
    count_records_edges,
    count_records_vertices,
    draw_labels,
    expected_records_edges,
    expected_records_vertices,
    record_depths,
    simulate_cuts_edges,
    simulate_cuts_vertices,
)
from splitrec.stats import ks_two_sample
from splitrec.streams import stream
from splitrec.tree import SplitTree, generate_tree

PATH2 = SplitTree.from_parents(oracles.path_tree_parents(2))
PATH3 = SplitTree.from_parents(oracles.path_tree_parents(3))
PATH4 = SplitTree.from_parents(oracles.path_tree_parents(4))
SINGLE = SplitTree.from_parents([-1])


def _mc(fn, tree, reps, seed=0):
    rng = np.random.default_rng(seed)
    x = np.array([fn(tree, rng) for _ in range(reps)], dtype=float)
    return x.mean(), x.std(ddof=1) / math.sqrt(reps)


def _count(trace_fn):
    return lambda t, r: trace_fn(t, r).count


@st.composite
def random_trees(draw, max_nodes=40):
    n = draw(st.integers(1, max_nodes))
    parents = [-1] + [draw(st.integers(0, v - 1)) for v in range(1, n)]
    return SplitTree.from_parents(parents)


# ---------------------------------------------------------------------------
# small cases


def test_single_node():
    rng = np.random.default_rng(0)
    assert count_records_vertices(SINGLE, rng) == 1
    assert count_records_edges(SINGLE, rng) == 0
    assert simulate_cuts_vertices(SINGLE, rng).count == 1
    assert simulate_cuts_edges(SINGLE, rng).count == 0
    assert expected_records_vertices(SINGLE) == 1
    assert expected_records_edges(SINGLE) == 0
    assert brute_force_mean_records(SINGLE, "vertex") == 1


@pytest.mark.parametrize(
    "fn", [count_records_vertices, _count(simulate_cuts_vertices)], ids=["records", "cuts"]
)
def test_two_node_path_vertex_mean(fn):
    m, se = _mc(fn, PATH2, 100_000)
    assert abs(m - 1.5) < 3 * se


def test_two_node_cut_takes_root_first_half_the_time():
    rng = np.random.default_rng(1)
    x = np.array([simulate_cuts_vertices(PATH2, rng).count for _ in range(40_000)])
    assert abs(np.mean(x == 1) - 0.5) < 3 * math.sqrt(0.25 / x.size)


@pytest.mark.parametrize("fn", [count_records_edges, _count(simulate_cuts_edges)], ids=["records", "cuts"])
def test_two_edge_path_edge_mean(fn):
    m, se = _mc(fn, PATH3, 100_000)
    assert abs(m - 1.5) < 3 * se


@pytest.mark.parametrize("k", [1, 2, 3])
def test_star_vertex_mean(k):
    star = SplitTree.from_parents(oracles.star_parents(k))
    assert brute_force_mean_records(star, "vertex") == 1 + Fraction(k, 2)
    m, se = _mc(count_records_vertices, star, 40_000)
    assert abs(m - (1 + k / 2)) < 3 * se


@pytest.mark.parametrize("k", [1, 3, 6])
def test_star_edges_are_all_records_and_all_cut(k):
    star = SplitTree.from_parents(oracles.star_parents(k))
    rng = np.random.default_rng(k)
    for _ in range(50):
        assert count_records_edges(star, rng) == k
        assert simulate_cuts_edges(star, rng).count == k
    assert expected_records_edges(star) == k


def test_expected_records_small_trees():
    assert expected_records_vertices(PATH3) == pytest.approx(11 / 6, abs=1e-15)
    assert expected_records_vertices(SplitTree.from_parents(oracles.star_parents(2))) == 2
    assert expected_records_edges(PATH4) == pytest.approx(11 / 6, abs=1e-15)
    complete = SplitTree.from_parents([-1, 0, 0, 1, 1, 2, 2])
    assert expected_records_edges(complete) == 4
    m, se = _mc(count_records_edges, complete, 40_000)
    assert abs(m - 4) < 3 * se


def test_brute_force_path3_matches_formula():
    assert brute_force_mean_records(PATH3, "vertex") == Fraction(11, 6)


def test_brute_force_size_limit():
    with pytest.raises(ValueError):
        brute_force_mean_records(SplitTree.from_parents(oracles.path_tree_parents(9)), "vertex")
    brute_force_mean_records(SplitTree.from_parents(oracles.path_tree_parents(9)), "edge")


@pytest.mark.parametrize("shape", oracles.all_rooted_shapes(6))
def test_brute_force_equals_depth_formula_on_six_node_trees(shape):
    t = SplitTree.from_parents(list(shape))
    depth = t.depth
    exact_v = sum(Fraction(1, int(d) + 1) for d in depth)
    exact_e = sum(Fraction(1, int(d)) for d in depth[1:])
    assert brute_force_mean_records(t, "vertex") == exact_v
    assert brute_force_mean_records(t, "edge") == exact_e
    # written independently in the oracle module
    assert oracles.brute_records(shape, "vertex") == exact_v


# ---------------------------------------------------------------------------
# properties


@given(tree=random_trees(), seed=st.integers(0, 2**32))
def test_count_bounds(tree, seed):
    rng = np.random.default_rng(seed)
    xv, xe = count_records_vertices(tree, rng), count_records_edges(tree, rng)
    assert 1 <= xv <= tree.N
    assert 0 <= xe <= tree.N - 1
    cv, ce = simulate_cuts_vertices(tree, rng), simulate_cuts_edges(tree, rng)
    assert 1 <= cv.count <= tree.N and cv.cuts[-1] == 0
    assert 0 <= ce.count <= tree.N - 1
    assert 0 not in ce.cuts


@given(tree=random_trees(), seed=st.integers(0, 2**32))
def test_records_match_definition(tree, seed):
    rng = np.random.default_rng(seed)
    lab = draw_labels(tree.N, rng)
    from splitrec.records import edge_record_mask, record_mask

    mask = record_mask(tree, lab)
    emask = edge_record_mask(tree, lab)
    for v in range(tree.N):
        anc, u = [], int(tree.parent[v])
        while u >= 0:
            anc.append(u)
            u = int(tree.parent[u])
        assert mask[v] == all(lab[v] < lab[a] for a in anc)
        if v > 0:
            assert emask[v] == all(lab[v] < lab[a] for a in anc if a != 0)


@given(tree=random_trees(), leaf_parent=st.integers(0, 10**6))
def test_adding_a_node_never_decreases_expected_records(tree, leaf_parent):
    parents = list(tree.parent) + [leaf_parent % tree.N]
    bigger = SplitTree.from_parents(parents)
    assert expected_records_vertices(bigger) >= expected_records_vertices(tree)


def test_record_count_ignores_label_law():
    tree = generate_tree(bst_params(), 50, 4)
    rng = np.random.default_rng(5)
    a = [count_records_vertices(tree, rng) for _ in range(10_000)]
    b = [count_records_vertices(tree, rng, law=lambda g, k: g.random(k)) for _ in range(10_000)]
    assert ks_two_sample(a, b)[1] > 0.001


def test_ties_are_redrawn():
    calls = {"n": 0}

    def law(g, k):
        calls["n"] += 1
        return np.zeros(k) if calls["n"] == 1 else g.random(k)

    lab = draw_labels(5, np.random.default_rng(0), law)
    assert calls["n"] == 2 and np.unique(lab).size == 5


@pytest.mark.parametrize("params", [bst_params(), mary_params(3)], ids=["bst", "mary3"])
def test_cuts_and_records_agree_in_law(params):
    tree = generate_tree(params, 120, 9)
    rng = np.random.default_rng(10)
    for rec, cut in ((count_records_vertices, simulate_cuts_vertices), (count_records_edges, simulate_cuts_edges)):
        a = [rec(tree, rng) for _ in range(3000)]
        b = [cut(tree, rng).count for _ in range(3000)]
        assert ks_two_sample(a, b)[1] > 0.001


def test_record_depths_are_depths_of_records():
    tree = generate_tree(bst_params(), 300, 1)
    d = record_depths(tree, np.random.default_rng(0))
    assert d[0] == 0 or 0 in d
    assert np.all(d <= tree.depth.max())


def test_cut_trace_csv():
    trace = simulate_cuts_vertices(PATH3, np.random.default_rng(3))
    buf = io.StringIO()
    trace.write_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "step,kind,node_index"
    assert len(rows) == trace.count + 1
    assert rows[-1].endswith(",0")


# ---------------------------------------------------------------------------
# capped records


def test_phi_limits():
    tree = generate_tree(bst_params(), 20, 2)
    assert conditional_expected_records(tree, 1e-12) < 1e-9
    assert conditional_expected_records(PATH2, math.inf) == 1
    assert conditional_expected_records(tree, math.inf) == pytest.approx(expected_records_edges(tree))
    with pytest.raises(ValueError):
        conditional_expected_records(tree, 0.0)
    with pytest.raises(ValueError):
        conditional_expected_records(tree, -1.0)


@given(a=st.floats(0.01, 5), b=st.floats(0.01, 5))
def test_phi_increasing_in_cap(a, b):
    tree = generate_tree(bst_params(), 30, 1)
    lo, hi = sorted((a, b))
    assert conditional_expected_records(tree, lo) <= conditional_expected_records(tree, hi) + 1e-15


def test_phi_matches_monte_carlo_at_cap_0_3():
    tree = generate_tree(bst_params(), 20, 2024)
    m, se = _mc(lambda t, r: capped_record_count(t, 0.3, r), tree, 100_000, seed=6)
    assert abs(m - conditional_expected_records(tree, 0.3)) < 3 * se
