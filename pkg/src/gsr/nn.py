"""Fixed-architecture neural kernels: 2-layer GCN, 2-layer MLP, losses, Adam.

Parameter containers hold plain numpy arrays; ``lift()`` swaps them for
autodiff leaves so the same forward functions serve training and inference.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .graph import NormalizedAdjacency


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int,
           dtype=np.float32) -> np.ndarray:
    """Uniform Glorot init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out)).astype(dtype)


@dataclass
class GcnParams:
    """Two graph-convolution layers; biases optional."""

    w1: np.ndarray | Tensor
    w2: np.ndarray | Tensor
    b1: np.ndarray | Tensor | None = None
    b2: np.ndarray | Tensor | None = None

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, d_hid: int, d_out: int,
             bias: bool = True, dtype=np.float32) -> "GcnParams":
        return cls(
            w1=glorot(rng, d_in, d_hid, dtype),
            w2=glorot(rng, d_hid, d_out, dtype),
            b1=np.zeros(d_hid, dtype=dtype) if bias else None,
            b2=np.zeros(d_out, dtype=dtype) if bias else None,
        )


@dataclass
class MlpParams:
    """Two affine layers with relu between them."""

    w1: np.ndarray | Tensor
    w2: np.ndarray | Tensor
    b1: np.ndarray | Tensor | None = None
    b2: np.ndarray | Tensor | None = None

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, d_hid: int, d_out: int,
             bias: bool = True, dtype=np.float32) -> "MlpParams":
        return cls(
            w1=glorot(rng, d_in, d_hid, dtype),
            w2=glorot(rng, d_hid, d_out, dtype),
            b1=np.zeros(d_hid, dtype=dtype) if bias else None,
            b2=np.zeros(d_out, dtype=dtype) if bias else None,
        )


def param_items(p) -> list[tuple[str, np.ndarray]]:
    """(name, array) pairs of the non-None fields, in declaration order."""
    out = []
    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        if v is not None:
            out.append((f.name, v))
    return out


def param_arrays(p) -> list[np.ndarray]:
    return [v for _, v in param_items(p)]


def lift(p):
    """Same container with arrays wrapped as trainable autodiff leaves."""
    kw = {}
    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        kw[f.name] = Tensor(v) if v is not None else None
    return type(p)(**kw)


def copy_params(p):
    kw = {}
    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        kw[f.name] = v.copy() if v is not None else None
    return type(p)(**kw)


def momentum_update(theta_k, theta_q, m: float):
    """Eq-style moving average: θ_k' = m·θ_k + (1−m)·θ_q, elementwise."""
    if not 0.0 <= m < 1.0:
        raise ValueError(f"momentum coefficient must be in [0, 1), got {m}")
    kw = {}
    for f in dataclasses.fields(theta_k):
        vk, vq = getattr(theta_k, f.name), getattr(theta_q, f.name)
        if (vk is None) != (vq is None):
            raise ValueError(f"parameter field {f.name} present on one side only")
        if vk is None:
            kw[f.name] = None
            continue
        if vk.shape != vq.shape:
            raise ValueError(f"shape mismatch on {f.name}: {vk.shape} vs {vq.shape}")
        kw[f.name] = m * vk + (1.0 - m) * vq
    return type(theta_k)(**kw)


def _xw(x, w) -> Tensor:
    if sp.issparse(x):
        return ad.spmm(x, w)
    return ad.matmul(x, w)


def gcn_forward(params: GcnParams, a_hat: NormalizedAdjacency, x,
                hidden_mask: np.ndarray | None = None) -> Tensor:
    """Z = Â · relu(Â·X·W1 (+b1)) · W2 (+b2).

    ``x`` may be dense, scipy-sparse, or a Tensor. ``hidden_mask`` multiplies
    the hidden activations (training-time dropout); None leaves them alone.
    """
    a = a_hat.matrix
    n = a.shape[0]
    xs = x.shape if not isinstance(x, Tensor) else x.data.shape
    if xs[0] != n:
        raise ValueError(f"X has {xs[0]} rows but graph has {n} nodes")
    h = ad.spmm(a, _xw(x, params.w1))
    if params.b1 is not None:
        h = ad.add(h, params.b1)
    h = ad.relu(h)
    if hidden_mask is not None:
        h = ad.mul_mask(h, hidden_mask)
    z = ad.spmm(a, ad.matmul(h, params.w2))
    if params.b2 is not None:
        z = ad.add(z, params.b2)
    return z


def mlp_forward(params: MlpParams, z) -> Tensor:
    """Affine → relu → affine."""
    h = ad.matmul(z, params.w1)
    if params.b1 is not None:
        h = ad.add(h, params.b1)
    h = ad.relu(h)
    out = ad.matmul(h, params.w2)
    if params.b2 is not None:
        out = ad.add(out, params.b2)
    return out


def info_nce(query, positive, negative_bank, tau: float) -> Tensor:
    """Mean of −log softmax(q·k⁺/τ) against the positive plus all bank rows.

    The denominator runs over K+1 keys: the fresh positive at index 0 and the
    K bank negatives.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    bank = negative_bank.data if isinstance(negative_bank, Tensor) else np.asarray(negative_bank)
    pos_logit = ad.rowdot(query, positive)
    neg_logits = ad.matmul(query, bank.T)
    logits = ad.scale(ad.concat_cols(pos_logit, neg_logits), 1.0 / tau)
    b = logits.data.shape[0]
    return ad.softmax_xent_mean(logits, np.zeros(b, dtype=np.int64))


def cross_entropy(logits, labels: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log softmax probability of the true class over masked rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if mask is not None:
        idx = np.flatnonzero(mask) if mask.dtype == np.bool_ else np.asarray(mask, dtype=np.int64)
        if len(idx) == 0:
            raise ValueError("cross_entropy over an empty mask")
        logits = ad.gather_rows(logits, idx)
        labels = labels[idx]
    return ad.softmax_xent_mean(logits, labels)


@dataclass
class AdamState:
    """Adaptive-moment optimizer state; moments mirror the parameter list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if state.weight_decay:
            g = g + state.weight_decay * p
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
