"""Dense GCN with negative-sample message passing, manual gradients and Adam.

Layer ``l`` computes

    Z = (A_hat - mu * N_l) @ H @ W_l

where ``A_hat`` is the self-looped symmetric-normalised adjacency and
``N_l[i, j]`` = (deg~(i) deg~(j))^-1/2 for every negative sample j of node i.
ReLU sits between layers; the last layer returns logits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dpp import SampleStore
from .graph import Graph


@dataclass
class ModelParams:
    weights: list[np.ndarray]
    mu: float = 0.5

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def hidden_dim(self) -> int:
        return self.weights[0].shape[1] if len(self.weights) > 1 else 0

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], float(self.mu))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    mu: float


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # H entering each layer
    pre: list[np.ndarray]  # Z of each layer
    post: list[np.ndarray]  # ReLU(Z) for hidden layers, Z for the last
    neg: list[sp.csr_matrix | None]
    mu: float
    weights: list[np.ndarray]
    norm_adj: sp.csr_matrix
    store: SampleStore

    @property
    def logits(self) -> np.ndarray:
        return self.post[-1]


def init_params(in_dim: int, hidden: int, num_classes: int, num_layers: int,
                rng: np.random.Generator, mu: float = 0.5) -> ModelParams:
    """Glorot-uniform weights for a ``num_layers``-deep network."""
    if num_layers < 1:
        raise ValueError("need at least one layer")
    dims = [in_dim] + [hidden] * (num_layers - 1) + [num_classes]
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    return ModelParams(weights, float(mu))


def negative_matrix(g: Graph, negs: dict[int, tuple[int, ...]]) -> sp.csr_matrix | None:
    """Sparse N with N[i, j] = (deg~(i) deg~(j))^-1/2 for each negative j of i; None if empty."""
    rows, cols = [], []
    for i, js in negs.items():
        rows.extend([i] * len(js))
        cols.extend(js)
    if not rows:
        return None
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    inv_sqrt = 1.0 / np.sqrt(g.degrees + 1.0)
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    n = g.num_nodes
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def gcn_layer_forward(H: np.ndarray, g: Graph, W: np.ndarray) -> np.ndarray:
    """Plain GCN propagation A_hat @ (H @ W)."""
    return g.norm_adj @ (H @ W)


def neg_gcn_layer_forward(H, g, W, negs, mu) -> np.ndarray:
    """GCN propagation minus mu times the normalised messages from negative samples."""
    out = gcn_layer_forward(H, g, W)
    N = negs if (negs is None or sp.issparse(negs)) else negative_matrix(g, negs)
    if N is None or mu == 0:
        return out
    return out - mu * (N @ (H @ W))


def forward(params: ModelParams, g: Graph, store: SampleStore | None = None):
    """Run every layer; returns (logits, cache)."""
    L = params.num_layers
    store = store if store is not None else SampleStore.empty(L)
    if store.num_layers != L:
        raise ValueError(f"sample store has {store.num_layers} layers, model has {L}")
    H = g.features
    inputs, pre, post, negs = [], [], [], []
    for l, W in enumerate(params.weights):
        N = negative_matrix(g, store.layers[l])
        Z = neg_gcn_layer_forward(H, g, W, N, params.mu)
        inputs.append(H)
        pre.append(Z)
        negs.append(N)
        H = np.maximum(Z, 0.0) if l < L - 1 else Z
        post.append(H)
    cache = ForwardCache(inputs, pre, post, negs, params.mu, params.weights, g.norm_adj, store)
    return H, cache


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    return z - (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))


def cross_entropy(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    """Mean negative log-likelihood over ``mask``; 0.0 for an empty mask."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        return 0.0
    lp = log_softmax(logits[mask])
    return float(-lp[np.arange(mask.size), labels[mask]].mean())


def backward(cache: ForwardCache, labels: np.ndarray, train_mask) -> Gradients:
    """Exact gradients of the mean cross-entropy over ``train_mask``.

    Negative-sample sets are constants; only the weights and mu receive
    gradients.
    """
    mask = np.asarray(train_mask, dtype=np.int64)
    L = len(cache.weights)
    grads_w = [np.zeros_like(W) for W in cache.weights]
    if mask.size == 0:
        return Gradients(grads_w, 0.0)
    logits = cache.post[-1]
    dZ = np.zeros_like(logits)
    p = np.exp(log_softmax(logits[mask]))
    p[np.arange(mask.size), labels[mask]] -= 1.0
    dZ[mask] = p / mask.size

    A = cache.norm_adj
    mu = cache.mu
    d_mu = 0.0
    for l in range(L - 1, -1, -1):
        H, W, N = cache.inputs[l], cache.weights[l], cache.neg[l]
        AH = A @ H
        if N is not None:
            NH = N @ H
            grads_w[l] = (AH - mu * NH).T @ dZ
            d_mu -= float(np.sum(dZ * (NH @ W)))
        else:
            grads_w[l] = AH.T @ dZ
        if l == 0:
            break
        G = dZ @ W.T
        dH = A.T @ G
        if N is not None:
            dH = dH - mu * (N.T @ G)
        dZ = dH * (cache.pre[l - 1] > 0)
    return Gradients(grads_w, d_mu)


@dataclass
class AdamState:
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    m_mu: float = 0.0
    v_mu: float = 0.0


def adam_step(params: ModelParams, grads: Gradients, state: AdamState | None = None,
              lr: float = 0.02, betas=(0.9, 0.999), eps: float = 1e-8,
              train_mu: bool = True):
    """One bias-corrected Adam update; mu is clamped at zero afterwards."""
    b1, b2 = betas
    if state is None or not state.m:
        state = AdamState(
            t=state.t if state else 0,
            m=[np.zeros_like(w) for w in params.weights],
            v=[np.zeros_like(w) for w in params.weights],
        )
    t = state.t + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_w, new_m, new_v = [], [], []
    for W, g, m, v in zip(params.weights, grads.weights, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        new_w.append(W - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    mu, m_mu, v_mu = params.mu, state.m_mu, state.v_mu
    if train_mu:
        m_mu = b1 * m_mu + (1 - b1) * grads.mu
        v_mu = b2 * v_mu + (1 - b2) * grads.mu ** 2
        mu = max(0.0, mu - lr * (m_mu / c1) / (math.sqrt(v_mu / c2) + eps))
    return ModelParams(new_w, mu), AdamState(t, new_m, new_v, m_mu, v_mu)


def aggregate_max(values):
    """Element-wise maximum of a non-empty multiset of scalars or vectors."""
    values = list(values)
    if not values:
        raise ValueError("cannot aggregate an empty multiset")
    if np.ndim(values[0]) == 0:
        return max(values)
    return np.max(np.asarray(values), axis=0)


def aggregate_mean(values):
    """Arithmetic mean of a non-empty multiset; exact for Fractions."""
    values = list(values)
    if not values:
        raise ValueError("cannot aggregate an empty multiset")
    if np.ndim(values[0]) == 0:
        return sum(values[1:], values[0]) / len(values)
    return np.mean(np.asarray(values, dtype=np.float64), axis=0)


def save_checkpoint(path, params: ModelParams, epoch: int, seed: int) -> None:
    data = {
        "shapes": [list(w.shape) for w in params.weights],
        "weights": [w.ravel().tolist() for w in params.weights],
        "mu": params.mu,
        "epoch": epoch,
        "seed": seed,
    }
    Path(path).write_text(json.dumps(data))


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    data = json.loads(Path(path).read_text())
    weights = [
        np.asarray(flat, dtype=np.float64).reshape(shape)
        for shape, flat in zip(data["shapes"], data["weights"])
    ]
    return ModelParams(weights, float(data["mu"])), {"epoch": data["epoch"], "seed": data["seed"]}
