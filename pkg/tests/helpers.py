"""Shared test oracles: finite differences and small dense references."""
from __future__ import annotations

import numpy as np


def finite_difference(f, arrays, step=1e-4):
    """Central-difference gradients of scalar f() w.r.t. each array, in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        flat, gf = a.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f()
            flat[i] = orig - step
            fm = f()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def rel_error(a, b, floor=1e-12):
    """Normwise relative error ||a-b|| / max(||a||, ||b||, floor)."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return np.linalg.norm(a - b) / denom


def dense_normalized_adjacency(num_nodes, edges):
    """Dense D̃^{-1/2}(A+I)D̃^{-1/2} reference."""
    a = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    a += np.eye(num_nodes)
    d = a.sum(axis=1)
    dinv = np.diag(1.0 / np.sqrt(d))
    return dinv @ a @ dinv


def random_graph_edges(rng, n, p):
    """Undirected Erdős–Rényi edge list as (u, v) with u < v."""
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.append((u, v))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)
