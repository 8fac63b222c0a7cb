"""Undirected attributed graphs: canonical storage, normalization, homophily, edits."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    pass


def _canonical_pairs(pairs: np.ndarray) -> np.ndarray:
    """Dedup undirected pairs to (u, v) with u < v, self-loops dropped, sorted."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if pairs.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph over dense node ids 0..num_nodes-1.

    ``edges`` holds each undirected edge once as (u, v) with u < v; the CSR
    neighbor lists (``indptr``/``indices``) materialize both directions.
    """

    num_nodes: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.edges, self.indptr, self.indices):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, num_nodes: int, pairs) -> "Graph":
        """Build a graph from arbitrary (possibly directed/duplicated) pairs.

        Input edges are symmetrized and deduplicated; self-loops are stripped.
        """
        if num_nodes < 0:
            raise GraphError("num_nodes must be >= 0")
        edges = _canonical_pairs(np.asarray(pairs if pairs is not None else [], dtype=np.int64))
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise GraphError(f"edge endpoint out of range [0, {num_nodes})")
        both = np.concatenate([edges, edges[:, ::-1]], axis=0) if edges.size else edges
        order = np.lexsort((both[:, 1], both[:, 0])) if both.size else np.array([], dtype=np.int64)
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=num_nodes) if both.size else np.zeros(num_nodes, dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = both[:, 1].copy() if both.size else np.empty(0, dtype=np.int64)
        return cls(num_nodes=num_nodes, edges=edges, indptr=indptr, indices=indices)

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted neighbor ids of u (read-only view)."""
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def edge_key_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def adjacency(self) -> sp.csr_matrix:
        """Binary symmetric adjacency A (no self-loops)."""
        data = np.ones(len(self.indices), dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.num_nodes, self.num_nodes))


@dataclass(frozen=True)
class LabeledSplit:
    """Per-node class labels plus disjoint train/val/test node masks."""

    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        for m in (self.train_mask, self.val_mask, self.test_mask):
            if m.shape != (n,) or m.dtype != np.bool_:
                raise GraphError("masks must be boolean arrays matching labels")
        if ((self.train_mask & self.val_mask) | (self.train_mask & self.test_mask)
                | (self.val_mask & self.test_mask)).any():
            raise GraphError("train/val/test masks overlap")
        covered = self.train_mask | self.val_mask | self.test_mask
        if (self.labels[covered] < 0).any():
            raise GraphError("masked node without a valid label")
        for arr in (self.labels, self.train_mask, self.val_mask, self.test_mask):
            arr.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric-normalized adjacency with self-loops: D̃^{-1/2}(A+I)D̃^{-1/2}."""

    matrix: sp.csr_matrix

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    """Â = D̃^{-1/2}(A+I)D̃^{-1/2} where D̃ is the degree matrix of A+I.

    Isolated nodes get a self-loop of weight 1.
    """
    a = g.adjacency() + sp.identity(g.num_nodes, format="csr", dtype=np.float64)
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    return NormalizedAdjacency(matrix=(d @ a @ d).tocsr())


def homophily_ratio(g: Graph, labels: np.ndarray) -> float:
    """Fraction of edges whose endpoints share a label; 0.0 on empty edge sets."""
    labels = np.asarray(labels)
    if g.num_edges == 0:
        warnings.warn("homophily ratio of an empty edge set is defined as 0", stacklevel=2)
        return 0.0
    u, v = g.edges[:, 0], g.edges[:, 1]
    if (labels[u] < 0).any() or (labels[v] < 0).any():
        raise GraphError("all edge endpoints must be labeled")
    return float(np.mean(labels[u] == labels[v]))


@dataclass(frozen=True)
class RefinementPlan:
    """Edge edits: ``add`` are non-edges ranked by score descending, ``remove``
    existing edges ranked ascending; ties broken by (u, v) ascending."""

    add_pairs: np.ndarray
    add_scores: np.ndarray
    remove_pairs: np.ndarray
    remove_scores: np.ndarray

    def __post_init__(self):
        for pairs, scores, descending in ((self.add_pairs, self.add_scores, True),
                                          (self.remove_pairs, self.remove_scores, False)):
            pairs = np.asarray(pairs)
            if pairs.ndim != 2 or pairs.shape[1] != 2:
                raise GraphError("plan pairs must have shape (m, 2)")
            if len(pairs) != len(scores):
                raise GraphError("plan scores must match pairs")
            if len(pairs) and (pairs[:, 0] >= pairs[:, 1]).any():
                raise GraphError("plan pairs must be canonical (u < v)")
            if not _ranked(pairs, np.asarray(scores, dtype=np.float64), descending):
                raise GraphError("plan list violates (score, min-id, max-id) ordering")
        for arr in (self.add_pairs, self.add_scores, self.remove_pairs, self.remove_scores):
            np.asarray(arr).setflags(write=False)

    @property
    def m_plus(self) -> int:
        return len(self.add_pairs)

    @property
    def m_minus(self) -> int:
        return len(self.remove_pairs)

    @classmethod
    def empty(cls) -> "RefinementPlan":
        z = np.empty((0, 2), dtype=np.int64)
        s = np.empty(0, dtype=np.float64)
        return cls(z, s, z.copy(), s.copy())


def _ranked(pairs: np.ndarray, scores: np.ndarray, descending: bool) -> bool:
    if len(pairs) < 2:
        return True
    s = -scores if descending else scores
    keys = list(zip(s, pairs[:, 0], pairs[:, 1]))
    return all(keys[i] <= keys[i + 1] for i in range(len(keys) - 1))


def rank_edge_list(pairs: np.ndarray, scores: np.ndarray, descending: bool) -> np.ndarray:
    """Order for ranked edge lists: score (desc or asc), then (u, v) ascending."""
    s = -scores if descending else scores
    return np.lexsort((pairs[:, 1], pairs[:, 0], s))


def apply_refinement(g: Graph, plan: RefinementPlan) -> Graph:
    """New graph with plan.add inserted and plan.remove deleted.

    Rejects plans that add an existing edge or remove a missing one.
    """
    current = g.edge_key_set()
    for u, v in plan.add_pairs:
        if (int(u), int(v)) in current:
            raise GraphError(f"plan adds existing edge ({u}, {v})")
        if not (0 <= u < g.num_nodes and 0 <= v < g.num_nodes):
            raise GraphError(f"plan adds out-of-range pair ({u}, {v})")
    for u, v in plan.remove_pairs:
        if (int(u), int(v)) not in current:
            raise GraphError(f"plan removes non-existent edge ({u}, {v})")
    removed = {(int(u), int(v)) for u, v in plan.remove_pairs}
    added = {(int(u), int(v)) for u, v in plan.add_pairs}
    new_edges = np.array(sorted((current - removed) | added), dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(g.num_nodes, new_edges)


@dataclass(frozen=True)
class Subgraph:
    """Induced subgraph with the original node ids and the center's local index."""

    graph: Graph
    nodes: np.ndarray
    center_index: int


def ego_subgraph(g: Graph, center: int, radius: int, fanout: int,
                 rng: np.random.Generator) -> Subgraph:
    """Induced subgraph on a sampled ``radius``-hop neighborhood of ``center``.

    Breadth-first expansion; per frontier node at most ``fanout`` previously
    unselected neighbors are kept (uniform sample without replacement, in
    candidate order). Deterministic given the generator state.
    """
    if radius < 1:
        raise GraphError("radius must be >= 1")
    if fanout < 0:
        raise GraphError("fanout must be >= 0")
    selected = {int(center)}
    frontier = [int(center)]
    for _ in range(radius):
        nxt: list[int] = []
        for u in frontier:
            cands = [int(v) for v in g.neighbors(u) if int(v) not in selected]
            if len(cands) > fanout:
                pick = rng.choice(len(cands), size=fanout, replace=False)
                cands = [cands[i] for i in np.sort(pick)]
            for v in cands:
                selected.add(v)
                nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    nodes = np.array(sorted(selected), dtype=np.int64)
    local = {int(n): i for i, n in enumerate(nodes)}
    sub_edges = [(local[int(u)], local[int(v)]) for u, v in g.edges
                 if int(u) in selected and int(v) in selected]
    sub = Graph.from_edges(len(nodes), np.array(sub_edges, dtype=np.int64).reshape(-1, 2))
    return Subgraph(graph=sub, nodes=nodes, center_index=local[int(center)])
