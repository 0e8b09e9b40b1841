"""Records and cuttings on a fixed rooted tree."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Literal, TextIO

import numpy as np

from .tree import SplitTree

Variant = Literal["vertex", "edge"]
BRUTE_FORCE_LIMIT = 8


def _levels(tree: SplitTree) -> list[np.ndarray]:
    order = np.argsort(tree.depth, kind="stable")
    counts = np.bincount(tree.depth)
    return np.split(order, np.cumsum(counts)[:-1])


def draw_labels(N: int, rng: np.random.Generator, law: Callable | None = None) -> np.ndarray:
    """i.i.d. continuous labels (Exp(1) by default); redrawn until all distinct."""
    law = law or (lambda g, k: g.standard_exponential(k))
    while True:
        lab = np.asarray(law(rng, N), dtype=float)
        if N < 2 or np.unique(lab).size == N:
            return lab


def record_mask(tree: SplitTree, labels: np.ndarray) -> np.ndarray:
    """Nodes whose label is smaller than every label strictly above them on the root path."""
    N = tree.N
    above = np.full(N, np.inf)  # min label over strict ancestors
    levels = _levels(tree)
    for lvl in levels[1:]:
        p = tree.parent[lvl]
        above[lvl] = np.minimum(above[p], labels[p])
    return labels < above


def edge_record_mask(tree: SplitTree, labels: np.ndarray) -> np.ndarray:
    """Edge labels sit on the child node; labels[root] is ignored."""
    N = tree.N
    above = np.full(N, np.inf)  # min edge label over edges strictly above
    levels = _levels(tree)
    for lvl in levels[2:]:
        p = tree.parent[lvl]
        above[lvl] = np.minimum(above[p], labels[p])
    mask = labels < above
    mask[0] = False
    return mask


def count_records_vertices(tree: SplitTree, rng: np.random.Generator, law: Callable | None = None) -> int:
    return int(record_mask(tree, draw_labels(tree.N, rng, law)).sum())


def count_records_edges(tree: SplitTree, rng: np.random.Generator, law: Callable | None = None) -> int:
    return int(edge_record_mask(tree, draw_labels(tree.N, rng, law)).sum())


def record_depths(tree: SplitTree, rng: np.random.Generator) -> np.ndarray:
    """Depths of the vertex records for one label draw."""
    return tree.depth[record_mask(tree, draw_labels(tree.N, rng))]


@dataclass(frozen=True)
class CutTrace:
    kind: str
    cuts: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.cuts)

    def write_csv(self, fh: TextIO, header: bool = True) -> None:
        w = csv.writer(fh)
        if header:
            w.writerow(["step", "kind", "node_index"])
        for step, v in enumerate(self.cuts, start=1):
            w.writerow([step, self.kind, v])


def _cut(tree: SplitTree, rng: np.random.Generator, kind: str) -> CutTrace:
    # pool holds the eligible alive nodes; an edge is named by its child node
    N = tree.N
    pool = list(range(N)) if kind == "vertex" else list(range(1, N))
    where = {v: i for i, v in enumerate(pool)}
    children = tree.children
    cuts = []
    while pool:
        v = pool[int(rng.integers(len(pool)))]
        cuts.append(v)
        if v == 0:
            break
        stack = [v]
        while stack:
            u = stack.pop()
            i = where.pop(u)
            last = pool.pop()
            if last != u:
                pool[i] = last
                where[last] = i
            stack.extend(int(c) for c in children[u] if c >= 0 and c in where)
    return CutTrace(kind, tuple(cuts))


def simulate_cuts_vertices(tree: SplitTree, rng: np.random.Generator) -> CutTrace:
    """Cut uniformly random remaining vertices, keeping the root's component, until the root is cut."""
    return _cut(tree, rng, "vertex")


def simulate_cuts_edges(tree: SplitTree, rng: np.random.Generator) -> CutTrace:
    """Cut uniformly random remaining edges until only the root is left."""
    return _cut(tree, rng, "edge")


def expected_records_vertices(tree: SplitTree) -> float:
    return float(np.sum(1.0 / (tree.depth + 1.0)))


def expected_records_edges(tree: SplitTree) -> float:
    return float(np.sum(1.0 / tree.depth[1:])) if tree.N > 1 else 0.0


def conditional_expected_records(tree: SplitTree, lambda_cap: float) -> float:
    """Expected records among non-root nodes when every record must also beat ``lambda_cap``.

    A node at depth j is a record with probability (1 - exp(-j*cap)) / j for Exp(1) labels.
    """
    if not lambda_cap > 0:
        raise ValueError(f"cap must be positive, got {lambda_cap}")
    d = tree.depth[1:].astype(float)
    if math.isinf(lambda_cap):
        return float(np.sum(1.0 / d))
    return float(np.sum(-np.expm1(-d * lambda_cap) / d))


def capped_record_count(tree: SplitTree, lambda_cap: float, rng: np.random.Generator) -> int:
    """Monte Carlo counterpart: non-root nodes whose Exp(1) label beats the path minimum and the cap.

    The root's own label is not part of the path (it is replaced by the cap).
    """
    lab = draw_labels(tree.N, rng)
    lab[0] = lambda_cap
    return int(record_mask(tree, lab)[1:].sum())


def brute_force_mean_records(tree: SplitTree, variant: Variant = "vertex") -> Fraction:
    """Exact mean record count over all label orderings, by enumeration."""
    if variant == "vertex":
        k = tree.N
        items = list(range(tree.N))
    elif variant == "edge":
        k = tree.N - 1
        items = list(range(1, tree.N))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if k > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} labelled items, got {k}")
    if k == 0:
        return Fraction(0)
    anc = []
    for v in range(tree.N):
        path = []
        u = int(tree.parent[v])
        while u >= 0:
            path.append(u)
            u = int(tree.parent[u])
        anc.append(path if variant == "vertex" else [a for a in path if a != 0])
    pos = {v: i for i, v in enumerate(items)}
    total = 0
    count = 0
    for perm in itertools.permutations(range(k)):
        count += 1
        for v in items:
            rank = perm[pos[v]]
            if all(perm[pos[a]] > rank for a in anc[v]):
                total += 1
    return Fraction(total, count)
