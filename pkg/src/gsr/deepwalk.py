"""Structural node embeddings: truncated random walks + skip-gram with negative sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .graph import Graph


class DeepwalkError(ValueError):
    pass


@dataclass(frozen=True)
class WalkCorpus:
    """Fixed-length random walks, one row per walk."""

    walks: np.ndarray  # (n_walks, walk_length) int64
    walks_per_node: int
    walk_length: int
    num_nodes: int

    @property
    def num_walks(self) -> int:
        return self.walks.shape[0]


def generate_walks(g: Graph, walks_per_node: int, walk_length: int, seed: int) -> WalkCorpus:
    """Uniform random walks, ``walks_per_node`` rooted at every non-isolated node.

    Each walk draws from its own stream seeded by (seed, root, walk_index), so
    the corpus is independent of generation order. In an undirected graph a
    reached node always has a neighbor, so walks run to full length.
    """
    if walk_length < 1:
        raise DeepwalkError("walk_length must be >= 1")
    if walks_per_node < 1:
        raise DeepwalkError("walks_per_node must be >= 1")
    roots = np.flatnonzero(g.degrees() > 0)
    n_walks = len(roots) * walks_per_node
    if n_walks == 0:
        return WalkCorpus(np.empty((0, walk_length), dtype=np.int64),
                          walks_per_node, walk_length, g.num_nodes)
    u = np.empty((n_walks, walk_length - 1), dtype=np.float64)
    i = 0
    for root in roots:
        for w in range(walks_per_node):
            ss = np.random.SeedSequence(seed, spawn_key=(int(root), w))
            u[i] = np.random.default_rng(ss).random(walk_length - 1)
            i += 1
    walks = np.empty((n_walks, walk_length), dtype=np.int64)
    walks[:, 0] = np.repeat(roots, walks_per_node)
    cur = walks[:, 0].copy()
    indptr, indices = g.indptr, g.indices
    for t in range(1, walk_length):
        deg = indptr[cur + 1] - indptr[cur]
        off = np.minimum((u[:, t - 1] * deg).astype(np.int64), deg - 1)
        cur = indices[indptr[cur] + off]
        walks[:, t] = cur
    return WalkCorpus(walks, walks_per_node, walk_length, g.num_nodes)


def context_pairs(corpus: WalkCorpus, window: int) -> np.ndarray:
    """All (center, context) positives with |offset| <= window, offset != 0."""
    if window < 1:
        raise DeepwalkError("window must be >= 1")
    w = corpus.walks
    chunks = []
    for off in range(1, window + 1):
        if off >= corpus.walk_length:
            break
        a = w[:, :-off].ravel()
        b = w[:, off:].ravel()
        chunks.append(np.stack([a, b], axis=1))
        chunks.append(np.stack([b, a], axis=1))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(chunks, axis=0)


def unigram_probs(corpus: WalkCorpus, power: float = 0.75) -> np.ndarray:
    """Noise distribution: corpus token frequency raised to ``power``."""
    counts = np.bincount(corpus.walks.ravel(), minlength=corpus.num_nodes).astype(np.float64)
    weights = counts ** power
    total = weights.sum()
    if total == 0:
        raise DeepwalkError("no walks; graph has no edges")
    return weights / total


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def skipgram_pair_loss(center: np.ndarray, context: np.ndarray,
                       negatives: np.ndarray) -> float:
    """Logistic skip-gram loss for one positive pair plus sampled negatives."""
    pos = -np.log(_sigmoid(center @ context))
    if len(negatives):
        neg = -np.log(_sigmoid(-(negatives @ center))).sum()
    else:
        neg = 0.0
    return float(pos + neg)


def skipgram_pair_grads(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Analytic gradients of :func:`skipgram_pair_loss`."""
    s_pos = _sigmoid(center @ context) - 1.0
    d_center = s_pos * context
    d_context = s_pos * center
    if len(negatives):
        s_neg = _sigmoid(negatives @ center)
        d_center = d_center + s_neg @ negatives
        d_negs = s_neg[:, None] * center[None, :]
    else:
        d_negs = np.zeros_like(negatives)
    return d_center, d_context, d_negs


@numba.njit(cache=True, fastmath=True)
def _sgd_kernel(w_in, w_out, centers, contexts, negs, lr0, lr1):  # pragma: no cover
    n_pairs = centers.shape[0]
    d = w_in.shape[1]
    grad_c = np.empty(d, dtype=np.float32)
    vrow = np.empty(d, dtype=np.float32)
    for i in range(n_pairs):
        lr = lr0 + (lr1 - lr0) * (i / n_pairs)
        c = centers[i]
        for j in range(d):
            vrow[j] = w_in[c, j]
            grad_c[j] = 0.0
        for k in range(negs.shape[1] + 1):
            if k == 0:
                o = contexts[i]
                label = 1.0
            else:
                o = negs[i, k - 1]
                label = 0.0
            dot = 0.0
            for j in range(d):
                dot += vrow[j] * w_out[o, j]
            if dot > 30.0:
                sig = 1.0
            elif dot < -30.0:
                sig = 0.0
            else:
                sig = 1.0 / (1.0 + np.exp(-dot))
            g = np.float32((sig - label) * lr)
            for j in range(d):
                grad_c[j] += g * w_out[o, j]
            for j in range(d):
                w_out[o, j] -= g * vrow[j]
        for j in range(d):
            w_in[c, j] -= grad_c[j]


@dataclass(frozen=True)
class SkipgramStats:
    pairs_total: int
    heldout_pairs: int
    initial_heldout_loss: float
    final_heldout_loss: float


def _heldout_loss(w_in, w_out, pairs, negs) -> float:
    v = w_in[pairs[:, 0]].astype(np.float64)
    u = w_out[pairs[:, 1]].astype(np.float64)
    pos = -np.log(_sigmoid(np.sum(v * u, axis=1)))
    un = w_out[negs].astype(np.float64)
    neg = -np.log(_sigmoid(-np.einsum("bd,bnd->bn", v, un))).sum(axis=1)
    return float((pos + neg).mean())


def train_skipgram(corpus: WalkCorpus, dim: int, window: int, negatives: int,
                   epochs: int, lr: float, seed: int,
                   heldout_fraction: float = 0.05,
                   chunk_size: int = 1_000_000) -> tuple[np.ndarray, SkipgramStats]:
    """Train skip-gram embeddings over the walk corpus.

    Minibatch-free sequential SGD with a linear learning-rate decay; negatives
    are drawn from the unigram^0.75 corpus distribution. Returns row-L2
    normalized embeddings (isolated nodes keep their initialization) and
    held-out loss statistics.
    """
    if dim < 1 or window < 1:
        raise DeepwalkError("dim and window must be >= 1")
    if corpus.num_walks == 0:
        raise DeepwalkError("no walks; graph has no edges")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xD17,)))
    n = corpus.num_nodes
    pairs = context_pairs(corpus, window)
    perm = rng.permutation(len(pairs))
    n_held = int(round(heldout_fraction * len(pairs)))
    held = pairs[perm[:n_held]]
    train = pairs[perm[n_held:]]
    if len(train) == 0:
        raise DeepwalkError("corpus too small: no training pairs left")

    probs = unigram_probs(corpus)
    cum = np.cumsum(probs)
    cum[-1] = 1.0

    w_in = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    w_out = np.zeros((n, dim), dtype=np.float32)

    eval_negs = np.searchsorted(cum, rng.random((len(held), max(negatives, 1))))
    init_loss = _heldout_loss(w_in, w_out, held, eval_negs) if n_held else float("nan")

    total = epochs * len(train)
    done = 0
    lr_floor = lr * 1e-4
    for _ in range(epochs):
        order = rng.permutation(len(train))
        for start in range(0, len(order), chunk_size):
            idx = order[start:start + chunk_size]
            chunk = train[idx]
            negs = np.searchsorted(cum, rng.random((len(chunk), negatives))) if negatives \
                else np.empty((len(chunk), 0), dtype=np.int64)
            lr0 = lr + (lr_floor - lr) * (done / total)
            done += len(chunk)
            lr1 = lr + (lr_floor - lr) * (done / total)
            _sgd_kernel(w_in, w_out, chunk[:, 0], chunk[:, 1],
                        np.ascontiguousarray(negs), lr0, lr1)

    final_loss = _heldout_loss(w_in, w_out, held, eval_negs) if n_held else float("nan")
    norms = np.sqrt((w_in.astype(np.float64) ** 2).sum(axis=1, keepdims=True))
    emb = (w_in / np.maximum(norms, 1e-12)).astype(np.float32)
    return emb, SkipgramStats(len(pairs), n_held, init_loss, final_loss)


def structural_embedding(g: Graph, dim: int = 64, walk_length: int = 40,
                         walks_per_node: int = 10, window: int = 5,
                         negatives: int = 5, epochs: int = 5, lr: float = 0.025,
                         seed: int = 0) -> np.ndarray:
    """Walks plus skip-gram in one call; the structural view matrix."""
    corpus = generate_walks(g, walks_per_node, walk_length, seed)
    emb, _ = train_skipgram(corpus, dim, window, negatives, epochs, lr, seed)
    return emb
