"""Minimal reverse-mode engine over a fixed op vocabulary.

Covers exactly what the training paths need: dense and sparse-dense matmul,
relu, row L2-normalization, row dots, column concat, gather, masking, softmax
cross-entropy, and scalar mixing. Not a general autodiff framework.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf; carries the offending op name."""

    def __init__(self, op: str):
        super().__init__(f"non-finite values produced by op '{op}'")
        self.op = op


class Tensor:
    """Node in the computation tape: a numpy array plus backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = True,
                 _parents: tuple = (), _backward: Callable | None = None):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def backward(self) -> None:
        """Reverse-mode sweep seeding d(self)/d(self) = 1."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def const(x) -> Tensor:
    return Tensor(x, requires_grad=False)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _check(out: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(out).all():
        raise NonFiniteError(op)
    return out


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else const(np.asarray(x))


def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = _check(a.data @ b.data, "matmul")

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return Tensor(out, _needs(a, b), (a, b), bwd)


def spmm(s: sp.spmatrix, x) -> Tensor:
    """Sparse constant @ dense tensor."""
    x = _wrap(x)
    s = s.tocsr()
    out = _check(s @ x.data, "spmm")

    def bwd(g):
        _accum(x, s.T @ g)

    return Tensor(out, x.requires_grad, (x,), bwd)


def relu(x) -> Tensor:
    x = _wrap(x)
    out = _check(np.maximum(x.data, 0), "relu")

    def bwd(g):
        _accum(x, g * (x.data > 0))

    return Tensor(out, x.requires_grad, (x,), bwd)


def add(a, b) -> Tensor:
    """Elementwise add; b may be a broadcastable row vector (bias)."""
    a, b = _wrap(a), _wrap(b)
    out = _check(a.data + b.data, "add")

    def bwd(g):
        _accum(a, g if a.data.shape == g.shape else _unbroadcast(g, a.data.shape))
        _accum(b, g if b.data.shape == g.shape else _unbroadcast(g, b.data.shape))

    return Tensor(out, _needs(a, b), (a, b), bwd)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def scale(x, c: float) -> Tensor:
    x = _wrap(x)
    out = _check(x.data * c, "scale")

    def bwd(g):
        _accum(x, g * c)

    return Tensor(out, x.requires_grad, (x,), bwd)


def mul_mask(x, mask: np.ndarray) -> Tensor:
    """Elementwise multiply by a constant mask (dropout and friends)."""
    x = _wrap(x)
    out = _check(x.data * mask, "mul_mask")

    def bwd(g):
        _accum(x, g * mask)

    return Tensor(out, x.requires_grad, (x,), bwd)


def gather_rows(x, idx: np.ndarray) -> Tensor:
    x = _wrap(x)
    idx = np.asarray(idx, dtype=np.int64)
    out = _check(x.data[idx], "gather_rows")

    def bwd(g):
        acc = np.zeros_like(x.data)
        np.add.at(acc, idx, g)
        _accum(x, acc)

    return Tensor(out, x.requires_grad, (x,), bwd)


def row_normalize(x, eps: float = 1e-12) -> Tensor:
    """Rows scaled to unit L2 norm: y_i = x_i / sqrt(|x_i|^2 + eps)."""
    x = _wrap(x)
    sq = np.sum(x.data * x.data, axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(sq + eps)
    out = _check(x.data * inv, "row_normalize")

    def bwd(g):
        dot = np.sum(g * x.data, axis=1, keepdims=True)
        _accum(x, (g - x.data * (dot * inv * inv)) * inv)

    return Tensor(out, x.requires_grad, (x,), bwd)


def rowdot(a, b) -> Tensor:
    """Per-row dot product of equal-shape matrices, returns shape (B, 1)."""
    a, b = _wrap(a), _wrap(b)
    out = _check(np.sum(a.data * b.data, axis=1, keepdims=True), "rowdot")

    def bwd(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return Tensor(out, _needs(a, b), (a, b), bwd)


def concat_cols(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    na = a.data.shape[1]
    out = _check(np.concatenate([a.data, b.data], axis=1), "concat_cols")

    def bwd(g):
        _accum(a, g[:, :na])
        _accum(b, g[:, na:])

    return Tensor(out, _needs(a, b), (a, b), bwd)


def softmax_xent_mean(logits, targets: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy against integer targets (max-stabilized)."""
    logits = _wrap(logits)
    targets = np.asarray(targets, dtype=np.int64)
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    denom = ez.sum(axis=1, keepdims=True)
    logp = (z - zmax) - np.log(denom)
    n = z.shape[0]
    out = _check(np.asarray(-logp[np.arange(n), targets].mean()), "softmax_xent_mean")

    def bwd(g):
        p = ez / denom
        p[np.arange(n), targets] -= 1.0
        _accum(logits, p * (g / n))

    return Tensor(out, logits.requires_grad, (logits,), bwd)


def mean_all(x) -> Tensor:
    x = _wrap(x)
    out = _check(np.asarray(x.data.mean()), "mean_all")

    def bwd(g):
        _accum(x, np.full_like(x.data, g / x.data.size))

    return Tensor(out, x.requires_grad, (x,), bwd)


def sum_all(x) -> Tensor:
    x = _wrap(x)
    out = _check(np.asarray(x.data.sum()), "sum_all")

    def bwd(g):
        _accum(x, np.full_like(x.data, g))

    return Tensor(out, x.requires_grad, (x,), bwd)


def mix(a, wa: float, b, wb: float) -> Tensor:
    """Scalar mixing wa*a + wb*b."""
    return add(scale(a, wa), scale(b, wb))


def evaluate_with_gradients(loss: Tensor, params: Sequence[Tensor]
                            ) -> tuple[float, list[np.ndarray]]:
    """Run the backward sweep and collect per-parameter gradients.

    Parameters unreachable from ``loss`` get zero gradients.
    """
    if loss.data.shape != ():
        raise ValueError("loss must be a scalar node")
    loss.backward()
    grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    return float(loss.data), grads
