"""Split-tree generation by sequential ball insertion, summaries, validation and I/O.

Trees are stored as an arena: node ``k`` has ``parent[k]``, ``depth[k]``,
``held[k]`` (balls held by the node itself, C_v), ``subtree[k]`` (balls in
its subtree, n_v) and ``children[k, i]`` (index of child ``i`` or -1).
Parents always precede their children in index order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np
from numba import njit

from .models import SplitParams, SplitVectorModel, check_vectors, parse_model

NO_NODE = -1


@njit(cache=True, nogil=True)
def _choose(vec, u):
    acc = 0.0
    last = 0
    for i in range(vec.shape[0]):
        if vec[i] > 0.0:
            last = i
        acc += vec[i]
        if u < acc:
            return i
    return last


@njit(cache=True, nogil=True)
def _grow(n, s, s0, s1, vectors, rng, uniform_roles):
    """Insert n balls; returns (status, nnodes, parent, depth, held, subtree, children, ins_depth).

    status is 0 on success and -1 if more nodes were needed than vector rows given.
    Overflow roles: positions [0, s0) stay, then b blocks of s1, then routed balls.
    """
    cap = vectors.shape[0]
    b = vectors.shape[1]
    parent = np.full(cap, -1, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    held = np.zeros(cap, dtype=np.int64)
    subtree = np.zeros(cap, dtype=np.int64)
    children = np.full((cap, b), -1, dtype=np.int64)
    ins_depth = np.zeros(n, dtype=np.int64)

    stack_node = np.empty(64, dtype=np.int64)
    stack_trk = np.empty(64, dtype=np.bool_)
    routed_child = np.empty(s + 1, dtype=np.int64)
    routed = s + 1 - s0 - b * s1
    nnodes = 1

    for k in range(n):
        top = 0
        stack_node[0] = 0
        stack_trk[0] = True
        top = 1
        tracked_node = -1
        while top > 0:
            top -= 1
            v = stack_node[top]
            tr = stack_trk[top]
            if subtree[v] > held[v]:
                # internal: route by the node's split vector
                subtree[v] += 1
                i = _choose(vectors[v], rng.random())
                c = children[v, i]
                if c < 0:
                    if nnodes >= cap:
                        return -1, nnodes, parent, depth, held, subtree, children, ins_depth
                    c = nnodes
                    nnodes += 1
                    parent[c] = v
                    depth[c] = depth[v] + 1
                    children[v, i] = c
                stack_node[top] = c
                stack_trk[top] = tr
                top += 1
            elif held[v] < s:
                held[v] += 1
                subtree[v] += 1
                if tr:
                    tracked_node = v
            else:
                # overflow of a full leaf; only the tracked ball's role matters
                tpos = -1
                leaving = s + 1 - s0
                if uniform_roles:
                    if tr or tracked_node == v:
                        tpos = rng.integers(0, s + 1)
                elif tr:
                    tpos = s0 + rng.integers(0, leaving)
                elif tracked_node == v:
                    # incoming ball takes a leaving role, residents fill the rest
                    r_in = s0 + rng.integers(0, leaving)
                    x = rng.integers(0, s)
                    tpos = x if x < r_in else x + 1
                if tpos >= 0:
                    tracked_node = -1
                held[v] = s0
                subtree[v] = s + 1
                if 0 <= tpos < s0:
                    tracked_node = v
                if s1 > 0:
                    for i in range(b):
                        if nnodes >= cap:
                            return -1, nnodes, parent, depth, held, subtree, children, ins_depth
                        c = nnodes
                        nnodes += 1
                        parent[c] = v
                        depth[c] = depth[v] + 1
                        children[v, i] = c
                        held[c] = s1
                        subtree[c] = s1
                        lo = s0 + i * s1
                        if lo <= tpos < lo + s1:
                            tracked_node = c
                for j in range(routed):
                    i = _choose(vectors[v], rng.random())
                    c = children[v, i]
                    if c < 0:
                        if nnodes >= cap:
                            return -1, nnodes, parent, depth, held, subtree, children, ins_depth
                        c = nnodes
                        nnodes += 1
                        parent[c] = v
                        depth[c] = depth[v] + 1
                        children[v, i] = c
                    routed_child[j] = c
                if top + routed > stack_node.shape[0]:
                    bigger = max(2 * stack_node.shape[0], top + routed)
                    sn = np.empty(bigger, dtype=np.int64)
                    st = np.empty(bigger, dtype=np.bool_)
                    sn[:top] = stack_node[:top]
                    st[:top] = stack_trk[:top]
                    stack_node = sn
                    stack_trk = st
                first_routed = s0 + b * s1
                # reversed so the first routed ball settles first
                for j in range(routed - 1, -1, -1):
                    stack_node[top] = routed_child[j]
                    stack_trk[top] = tpos == first_routed + j
                    top += 1
        ins_depth[k] = depth[tracked_node]
    return 0, nnodes, parent, depth, held, subtree, children, ins_depth


@dataclass(frozen=True, eq=False)
class SplitTree:
    parent: np.ndarray
    depth: np.ndarray
    held: np.ndarray
    subtree: np.ndarray
    children: np.ndarray
    n: int
    insertion_depths: Optional[np.ndarray] = None
    params: Optional[SplitParams] = None
    seed: Optional[int] = None
    split_vectors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return int(self.parent.shape[0])

    @property
    def b(self) -> int:
        return int(self.children.shape[1])

    def child_list(self, v: int) -> list[int]:
        return [int(c) for c in self.children[v] if c != NO_NODE]

    def is_leaf(self, v: int) -> bool:
        return not np.any(self.children[v] != NO_NODE)

    def structurally_equal(self, other: "SplitTree") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.parent, other.parent)
            and np.array_equal(self.held, other.held)
            and np.array_equal(self.subtree, other.subtree)
            and np.array_equal(self.children, other.children)
        )

    @classmethod
    def from_parents(cls, parents, b: Optional[int] = None) -> "SplitTree":
        """Build a tree shape from a parent array (root first, parent[0] = -1).

        Every node holds one ball, so the result is a valid tree for the
        record/cutting machinery even though no split process produced it.
        Parents must precede children.
        """
        parents = np.asarray(parents, dtype=np.int64)
        N = parents.shape[0]
        if N == 0 or parents[0] != NO_NODE:
            raise ValueError("parents[0] must be -1 (the root)")
        if np.any(parents[1:] < 0) or np.any(parents[1:] >= np.arange(1, N)):
            raise ValueError("each parent must precede its child")
        outdeg = np.bincount(parents[1:], minlength=N) if N > 1 else np.zeros(1, dtype=np.int64)
        b = max(2, int(outdeg.max()) if b is None else b)
        children = np.full((N, b), NO_NODE, dtype=np.int64)
        slot = np.zeros(N, dtype=np.int64)
        depth = np.zeros(N, dtype=np.int64)
        for v in range(1, N):
            p = parents[v]
            children[p, slot[p]] = v
            slot[p] += 1
            depth[v] = depth[p] + 1
        held = np.ones(N, dtype=np.int64)
        subtree = held.copy()
        for v in range(N - 1, 0, -1):
            subtree[parents[v]] += subtree[v]
        return cls(parents, depth, held, subtree, children, n=N)


def generate_tree(
    params: SplitParams,
    n: int,
    rng: np.random.Generator | int | None = None,
    *,
    keep_vectors: bool = False,
    uniform_roles: bool = False,
) -> SplitTree:
    """Distribute n balls one at a time into a split tree.

    Split vectors are attached to nodes in creation order, one per node
    ever created. ``rng`` may be a Generator or an integer seed; with a
    seed the tree is a pure function of (params, n, seed).

    When a full leaf overflows, by default the s0 balls kept are a uniform
    subset of the s resident balls and the incoming ball is passed down
    (search-tree semantics, so for the BST the insertion depths are the
    classical key depths). ``uniform_roles=True`` instead picks the kept
    balls uniformly among all s + 1. The tree shape has the same law
    either way; only ``insertion_depths`` differ.
    """
    if not isinstance(params, SplitParams):
        raise TypeError("params must be SplitParams")
    if int(n) != n or n < 1:
        raise ValueError(f"ball count must be a positive integer, got {n!r}")
    n = int(n)
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = rng
        rng = np.random.default_rng(rng)
    model = params.model
    # with s0 >= 1 every node keeps a ball, so N <= n
    cap = n if params.s0 >= 1 else 4 * n + 16
    while True:
        vectors = np.ascontiguousarray(model.sample(rng, cap), dtype=np.float64)
        check_vectors(vectors, model.b)
        status, N, parent, depth, held, subtree, children, ins = _grow(
            n, params.s, params.s0, params.s1, vectors, rng, uniform_roles
        )
        if status == 0:
            break
        cap *= 2
    return SplitTree(
        parent=parent[:N].copy(),
        depth=depth[:N].copy(),
        held=held[:N].copy(),
        subtree=subtree[:N].copy(),
        children=children[:N].copy(),
        n=n,
        insertion_depths=ins,
        params=params,
        seed=seed,
        split_vectors=vectors[:N].copy() if keep_vectors else None,
    )


def sample_last_depth(params: SplitParams, n: int, rng: np.random.Generator) -> int:
    """Depth of the n-th inserted ball, sampled along its path only.

    Uses the subtree-cardinality law: a node whose subtree already holds
    m > s balls keeps s0 of them and passes s1 + Multinomial(m - s0 - b*s1, V)
    to its children; the new ball follows child i with probability V_i. When
    m == s the new ball triggers an overflow, which is resolved by growing a
    fresh (s+1)-ball tree. Same law as ``generate_tree(...).insertion_depths[-1]``
    at O(depth) cost.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s, s0, s1, b = params.s, params.s0, params.s1, params.b
    m = n - 1
    d = 0
    while True:
        if m < s:
            return d
        if m == s:
            local = generate_tree(params, s + 1, rng)
            return d + int(local.insertion_depths[-1])
        v = params.model.sample(rng, 1)[0]
        counts = rng.multinomial(m - s0 - b * s1, v) + s1
        i = _choose(v, rng.random())
        m = int(counts[i])
        d += 1


@dataclass(frozen=True)
class TreeSummary:
    N: int
    height: int
    node_depth_hist: np.ndarray
    ball_depth_hist: np.ndarray
    upsilon: int
    psi: int

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "height": self.height,
            "node_depth_hist": self.node_depth_hist.tolist(),
            "ball_depth_hist": self.ball_depth_hist.tolist(),
            "upsilon": self.upsilon,
            "psi": self.psi,
        }


def summarize(tree: SplitTree) -> TreeSummary:
    height = int(tree.depth.max())
    node_hist = np.bincount(tree.depth, minlength=height + 1)
    ball_hist = np.bincount(tree.depth, weights=tree.held, minlength=height + 1).astype(np.int64)
    return TreeSummary(
        N=tree.N,
        height=height,
        node_depth_hist=node_hist,
        ball_depth_hist=ball_hist,
        upsilon=int(tree.depth.sum()),
        psi=int(np.dot(tree.held, tree.depth)),
    )


def validate(tree: SplitTree) -> list[str]:
    """List every violated structural invariant (empty iff the tree is valid)."""
    out = []
    N = tree.N
    if int(tree.held.sum()) != tree.n:
        out.append(f"ball conservation: sum of C_v is {int(tree.held.sum())}, n is {tree.n}")
    if N == 0:
        return out + ["tree has no nodes"]
    if tree.parent[0] != NO_NODE or tree.depth[0] != 0:
        out.append("node 0 is not a depth-0 root")
    child_sum = np.zeros(N, dtype=np.int64)
    for v in range(N):
        kids = tree.child_list(v)
        for c in kids:
            if not 0 < c < N:
                out.append(f"node {v}: child index {c} out of range")
                continue
            if tree.parent[c] != v:
                out.append(f"node {c}: parent is {tree.parent[c]} but listed as child of {v}")
            if tree.depth[c] != tree.depth[v] + 1:
                out.append(f"node {c}: depth {tree.depth[c]} != parent depth {tree.depth[v]} + 1")
            child_sum[v] += tree.subtree[c]
        if tree.held[v] < 0:
            out.append(f"node {v}: negative C_v")
        if tree.subtree[v] < 1:
            out.append(f"node {v}: useless node (n_v = {tree.subtree[v]}) stored")
        if tree.subtree[v] != tree.held[v] + child_sum[v]:
            out.append(
                f"node {v}: n_v = {tree.subtree[v]} but C_v + sum of children n_c = {tree.held[v] + child_sum[v]}"
            )
        leaf = not kids
        if leaf != (tree.held[v] == tree.subtree[v] > 0):
            out.append(f"node {v}: leaf status disagrees with C_v = n_v > 0")
    if tree.insertion_depths is not None and len(tree.insertion_depths) != tree.n:
        out.append(f"insertion_depths has length {len(tree.insertion_depths)}, n is {tree.n}")
    return out


def write_tree(tree: SplitTree, fh: TextIO) -> None:
    """Line format: header, then ``index parent depth C_v n_v child_1 ... child_b`` (-1 = absent)."""
    p = tree.params
    b, s, s0, s1 = (p.b, p.s, p.s0, p.s1) if p is not None else (tree.b, 0, 0, 0)
    seed = "none" if tree.seed is None else tree.seed
    model = f" model={p.model.to_spec()}" if p is not None else ""
    fh.write(f"splittree v1 b={b} s={s} s0={s0} s1={s1} n={tree.n} seed={seed}{model}\n")
    for v in range(tree.N):
        kids = " ".join(str(int(c)) for c in tree.children[v])
        fh.write(f"{v} {int(tree.parent[v])} {int(tree.depth[v])} {int(tree.held[v])} {int(tree.subtree[v])} {kids}\n")


def read_tree(fh: TextIO, model: Optional[SplitVectorModel] = None) -> SplitTree:
    header = fh.readline().split()
    if header[:2] != ["splittree", "v1"]:
        raise ValueError("not a splittree v1 file")
    meta = dict(tok.split("=", 1) for tok in header[2:])
    b = int(meta["b"])
    rows = [list(map(int, line.split())) for line in fh if line.strip()]
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), 5 + b)
    if not np.array_equal(arr[:, 0], np.arange(len(rows))):
        raise ValueError("node indices must be 0..N-1 in order")
    params = None
    if model is None and "model" in meta:
        try:
            model = parse_model(meta["model"]).model
        except ValueError:
            model = None
    if model is not None:
        params = SplitParams(model, int(meta["s"]), int(meta["s0"]), int(meta["s1"]))
    seed = None if meta.get("seed", "none") == "none" else int(meta["seed"])
    return SplitTree(
        parent=arr[:, 1].copy(),
        depth=arr[:, 2].copy(),
        held=arr[:, 3].copy(),
        subtree=arr[:, 4].copy(),
        children=arr[:, 5:].copy(),
        n=int(meta["n"]),
        params=params,
        seed=seed,
    )
