"""Graph data model, k-hop neighborhoods, and homophily/heterophily measures.

Central quantities:

* ``khop_adjacency``: hop-k neighbors are nodes at shortest-path distance
  exactly k that are reachable by at least k distinct length-k walks, with
  self-loops removed first, so hop sets never contain the ego node.
* ``node_homophily``: average same-class neighbor fraction over non-isolated
  nodes.
* ``heterophily_matrix`` / ``d_hete``: class-to-class connection profile
  H = (YᵀAY) ⊘ (YᵀAE) and the squared Frobenius distance between profiles
  under predicted vs. true labels, used to rank candidate architectures.
"""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .rng import stream
from .sparse import SparseMatrix


class Graph:
    """Undirected, unweighted attributed graph with integer node labels."""

    def __init__(self, name: str, x: np.ndarray, y: np.ndarray,
                 adj: SparseMatrix, p: int | None = None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2:
            raise ValueError("X must be 2-D (n x d0)")
        n = x.shape[0]
        if y.shape != (n,):
            raise ValueError("labels must be a length-n vector")
        if adj.shape != (n, n):
            raise ValueError(f"adjacency shape {adj.shape} != ({n}, {n})")
        if not adj.is_symmetric():
            raise ValueError("adjacency must be symmetric")
        if y.size and y.min() < 0:
            raise ValueError("labels must be non-negative")
        self.p = int(y.max()) + 1 if p is None else int(p)
        if y.size and y.max() >= self.p:
            raise ValueError("label out of range")
        self.name = name
        self.x = x
        self.y = y
        self.adj = adj

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d0(self) -> int:
        return self.x.shape[1]

    def num_undirected_edges(self) -> int:
        rows, cols, _ = self.adj.coo()
        off = int(np.count_nonzero(rows != cols))
        loops = int(np.count_nonzero(rows == cols))
        return off // 2 + loops

    def __repr__(self) -> str:
        return (f"Graph({self.name!r}, n={self.n}, edges={self.num_undirected_edges()}, "
                f"d0={self.d0}, p={self.p})")


@dataclasses.dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for field in ("train", "val", "test"):
            m = np.asarray(getattr(self, field), dtype=bool)
            setattr(self, field, m)
        if not (self.train.shape == self.val.shape == self.test.shape):
            raise ValueError("split masks must have equal length")
        if (np.any(self.train & self.val) or np.any(self.train & self.test)
                or np.any(self.val & self.test)):
            raise ValueError("split masks overlap")


@dataclasses.dataclass
class SplitSet:
    splits: list[Split]

    def __len__(self) -> int:
        return len(self.splits)

    def __getitem__(self, i: int) -> Split:
        return self.splits[i]


@dataclasses.dataclass
class KHopSet:
    """Binary hop adjacencies Ā_1..Ā_K, all self-loop-free and symmetric."""
    hops: list[SparseMatrix]

    @property
    def max_hop(self) -> int:
        return len(self.hops)

    def __getitem__(self, k: int) -> SparseMatrix:
        """1-indexed: khops[1] is the direct-neighbor adjacency."""
        if not 1 <= k <= len(self.hops):
            raise IndexError(f"hop {k} outside 1..{len(self.hops)}")
        return self.hops[k - 1]


def _binary_no_loops(adj: SparseMatrix) -> sp.csr_matrix:
    a = adj.csr.copy()
    a.data[:] = 1.0
    a = a.tolil()
    a.setdiag(0.0)
    a = a.tocsr()
    a.eliminate_zeros()
    return a


def khop_adjacency(adj: SparseMatrix, k: int) -> SparseMatrix:
    """Nodes at distance exactly k with >= k distinct length-k walks."""
    if k < 1:
        raise ValueError("k must be >= 1")
    a1 = _binary_no_loops(adj)
    if k == 1:
        return SparseMatrix(a1)
    n = a1.shape[0]
    # frontier BFS with sparse binary algebra: exact-distance-k pair mask
    known = (sp.eye(n, format="csr") + a1).tocsr()
    known.data[:] = 1.0
    frontier = a1.copy()
    for _ in range(k - 1):
        cand = (frontier @ a1).tocsr()
        cand.data[:] = 1.0
        frontier = (cand - cand.multiply(known)).tocsr()
        frontier.eliminate_zeros()
        known = (known + frontier).tocsr()
        known.data[:] = 1.0
    walks = a1
    for _ in range(k - 1):
        walks = walks @ a1
    at_k = frontier.multiply(walks).tocsr()  # walk counts at exact distance k
    at_k.data = np.where(at_k.data >= k, 1.0, 0.0)
    at_k.eliminate_zeros()
    return SparseMatrix(at_k)


def build_khop(adj: SparseMatrix, max_hop: int) -> KHopSet:
    return KHopSet([khop_adjacency(adj, k) for k in range(1, max_hop + 1)])


def sym_norm(adj: SparseMatrix) -> SparseMatrix:
    """D^{-1/2} Ā D^{-1/2}; zero-degree rows and columns stay all-zero."""
    a = adj.csr
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv_sqrt)
    return SparseMatrix((d @ a @ d).tocsr())


def row_norm(adj: SparseMatrix) -> SparseMatrix:
    """D^{-1} Ā (neighborhood mean); zero-degree rows stay all-zero."""
    a = adj.csr
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return SparseMatrix((sp.diags(inv) @ a).tocsr())


def node_homophily(graph: Graph) -> float:
    """Mean same-class neighbor fraction over nodes with >= 1 neighbor."""
    a = _binary_no_loops(graph.adj)
    deg = np.asarray(a.sum(axis=1)).ravel()
    included = deg > 0
    if not np.any(included):
        raise ValueError("node_homophily undefined: all nodes isolated")
    y = graph.y
    rows, cols = a.nonzero()
    same = (y[rows] == y[cols]).astype(np.float64)
    same_count = np.bincount(rows, weights=same, minlength=graph.n)
    frac = same_count[included] / deg[included]
    return float(frac.mean())


def onehot(labels: np.ndarray, p: int, mask: np.ndarray | None = None) -> np.ndarray:
    """n x p one-hot rows; rows outside mask are all-zero."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    y = np.zeros((n, p))
    if mask is None:
        sel = np.arange(n)
    else:
        sel = np.flatnonzero(np.asarray(mask, dtype=bool))
    y[sel, labels[sel]] = 1.0
    return y


@dataclasses.dataclass
class HeterophilyMatrix:
    values: np.ndarray  # p x p, entries in [0, 1]
    node_mask: np.ndarray


def heterophily_matrix(labels: np.ndarray, p: int, adj: SparseMatrix,
                       node_mask: np.ndarray | None = None) -> HeterophilyMatrix:
    """Class-connection profile H = (YᵀAY) ⊘ (YᵀAE), with 0/0 -> 0.

    Y has one-hot rows for masked nodes and zero rows elsewhere; A is used in
    full, so masked nodes' links to unmasked neighbors still enter the
    denominator column totals.
    """
    n = adj.shape[0]
    if node_mask is None:
        node_mask = np.ones(n, dtype=bool)
    node_mask = np.asarray(node_mask, dtype=bool)
    y = onehot(labels, p, node_mask)
    yta = adj.csr.T.dot(y).T  # p x n, equals Yᵀ A for symmetric A
    num = yta @ y
    den = np.repeat(yta.sum(axis=1, keepdims=True), p, axis=1)
    vals = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return HeterophilyMatrix(values=vals, node_mask=node_mask)


def d_hete(pred_labels: np.ndarray, true_labels: np.ndarray, p: int,
           adj: SparseMatrix, node_mask: np.ndarray | None = None) -> float:
    """Squared Frobenius distance between predicted and true class profiles."""
    h_pred = heterophily_matrix(pred_labels, p, adj, node_mask).values
    h_true = heterophily_matrix(true_labels, p, adj, node_mask).values
    diff = h_pred - h_true
    return float(np.sum(diff * diff))


def sbm_generate(class_sizes: Sequence[int], mixing: np.ndarray,
                 means: np.ndarray, sigma: float, seed: int,
                 name: str = "sbm") -> Graph:
    """Stochastic block model with per-class Gaussian features.

    Each unordered pair (u, v) is an edge with probability mixing[y_u, y_v];
    node features are means[y] + sigma * N(0, I). Fully determined by seed.
    """
    class_sizes = [int(s) for s in class_sizes]
    if any(s <= 0 for s in class_sizes):
        raise ValueError("class sizes must be positive")
    p = len(class_sizes)
    mixing = np.asarray(mixing, dtype=np.float64)
    if mixing.shape != (p, p):
        raise ValueError(f"mixing must be {p} x {p}")
    if not np.allclose(mixing, mixing.T):
        raise ValueError("mixing must be symmetric")
    if mixing.min() < 0 or mixing.max() > 1:
        raise ValueError("mixing entries must be probabilities")
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 2 or means.shape[0] != p:
        raise ValueError("means must be p x d0")

    n = sum(class_sizes)
    y = np.repeat(np.arange(p), class_sizes)
    u, v = np.triu_indices(n, k=1)
    edge_rng = stream(seed, "sbm/edges")
    keep = edge_rng.random(u.size) < mixing[y[u], y[v]]
    rows = np.concatenate([u[keep], v[keep]])
    cols = np.concatenate([v[keep], u[keep]])
    adj = SparseMatrix.from_edges(n, n, rows, cols)

    feat_rng = stream(seed, "sbm/features")
    x = means[y] + sigma * feat_rng.normal(size=(n, means.shape[1]))
    return Graph(name=name, x=x, y=y, adj=adj, p=p)


def generate_splits(graph: Graph, ratios: Sequence[float] = (0.48, 0.32, 0.20),
                    count: int = 10, seed: int = 0) -> SplitSet:
    """Per-class stratified random train/val/test partitions."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three numbers summing to 1")
    splits = []
    for s in range(count):
        rng = stream(seed, f"splits/{s}")
        train = np.zeros(graph.n, dtype=bool)
        val = np.zeros(graph.n, dtype=bool)
        test = np.zeros(graph.n, dtype=bool)
        for c in range(graph.p):
            idx = np.flatnonzero(graph.y == c)
            if idx.size < 3:
                raise ValueError(f"class {c} has {idx.size} nodes; need >= 3")
            idx = rng.permutation(idx)
            n_tr = int(round(ratios[0] * idx.size))
            n_va = int(round(ratios[1] * idx.size))
            n_tr = max(1, min(n_tr, idx.size - 2))
            n_va = max(1, min(n_va, idx.size - n_tr - 1))
            train[idx[:n_tr]] = True
            val[idx[n_tr:n_tr + n_va]] = True
            test[idx[n_tr + n_va:]] = True
        splits.append(Split(train=train, val=val, test=test))
    return SplitSet(splits)
