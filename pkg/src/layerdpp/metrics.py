"""Accuracy, cross-layer overlap rates of negative samples, and Mean Average Distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import kmeans
from .dpp import SampleStore


@dataclass
class OverlapReport:
    ovr_node: float
    ovr_cls: dict[int, float] = field(default_factory=dict)  # multiplier -> rate
    per_layer_node: list[float] = field(default_factory=list)
    K: dict[int, int] = field(default_factory=dict)  # multiplier -> cluster count

    def to_json(self) -> dict:
        return {
            "ovr_node": self.ovr_node,
            "ovr_cls": {str(m): v for m, v in self.ovr_cls.items()},
            "per_layer_node": self.per_layer_node,
            "K": {str(m): k for m, k in self.K.items()},
        }


def accuracy(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    """Share of ``mask`` nodes whose argmax logit (lowest id on ties) equals the label."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("accuracy needs a non-empty mask")
    pred = np.argmax(logits[mask], axis=1)
    return float(np.mean(pred == np.asarray(labels)[mask]))


def _overlap(sets_by_layer, central, num_layers, per_layer=None) -> float:
    total, count = 0.0, 0
    for l in range(1, num_layers):
        lt, lc = 0.0, 0
        for i in central:
            cur = sets_by_layer[l].get(i)
            prev = sets_by_layer[l - 1].get(i)
            if cur is None or prev is None:
                raise ValueError(f"node {i} missing from layer {l} or {l + 1}")
            if not cur:
                continue
            lt += len(set(prev) & set(cur)) / len(set(cur))
            lc += 1
        if per_layer is not None:
            per_layer.append(lt / lc if lc else float("nan"))
        total += lt
        count += lc
    if count == 0:
        raise ValueError("no (node, layer) pair with a non-empty sample set")
    return total / count


def ovr_node(store: SampleStore, central, L: int | None = None, per_layer=None) -> float:
    """Mean over layers 2..L and central nodes of |prev & cur| / |cur|.

    Pairs whose current sample set is empty are skipped.
    """
    L = store.num_layers if L is None else L
    return _overlap(store.layers, list(central), L, per_layer)


def canonical_labels(assign: np.ndarray) -> np.ndarray:
    """Renumber clusters by their smallest member, so separate fits share ids."""
    assign = np.asarray(assign)
    _, first = np.unique(assign, return_index=True)
    order = assign[np.sort(first)]
    remap = np.empty(assign.max() + 1, dtype=np.int64)
    remap[order] = np.arange(order.size)
    return remap[assign]


def ovr_cls(store: SampleStore, central, reps_per_layer, K: int,
            rng: np.random.Generator, L: int | None = None) -> float:
    """Like :func:`ovr_node` but on the sets of k-means cluster ids of the samples.

    Layer ``l`` samples are mapped through a fresh k-means fit on
    ``reps_per_layer[l]``, with cluster ids made canonical per fit.
    """
    L = store.num_layers if L is None else L
    if K < 1:
        raise ValueError("K must be >= 1")
    mapped = []
    for l in range(L):
        assign = canonical_labels(kmeans(reps_per_layer[l], K, rng).assignment)
        mapped.append({i: tuple(sorted({int(assign[j]) for j in s}))
                       for i, s in store.layers[l].items()})
    return _overlap(mapped, list(central), L)


def mad(reps: np.ndarray, scale: float = 100.0, zero_tol: float = 1e-12) -> float:
    """Mean Average Distance over cosine distances, times ``scale``.

    Zero vectors have cosine 0 to everything.  Per-node averages count only
    non-zero distances, and the final mean only nodes with a non-zero average.
    """
    x = np.asarray(reps, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("MAD needs at least two rows")
    norms = np.linalg.norm(x, axis=1)
    unit = np.divide(x, norms[:, None], out=np.zeros_like(x), where=norms[:, None] > 0)
    D = 1.0 - unit @ unit.T
    np.fill_diagonal(D, 0.0)
    D[np.abs(D) <= zero_tol] = 0.0
    nz = np.count_nonzero(D, axis=1)
    Di = np.divide(D.sum(axis=1), nz, out=np.zeros(n), where=nz > 0)
    cnt = np.count_nonzero(Di)
    return float(scale * Di.sum() / cnt) if cnt else 0.0


def overlap_report(store: SampleStore, central, reps_per_layer, num_classes: int,
                   multipliers=(1, 5), rng: np.random.Generator | None = None) -> OverlapReport:
    """Node overlap plus cluster overlap at K = multiplier * num_classes for each multiplier."""
    rng = rng if rng is not None else np.random.default_rng(0)
    per_layer: list[float] = []
    report = OverlapReport(ovr_node(store, central, per_layer=per_layer), per_layer_node=per_layer)
    n = reps_per_layer[0].shape[0]
    for m in multipliers:
        K = min(m * max(num_classes, 1), n)
        report.K[m] = K
        report.ovr_cls[m] = ovr_cls(store, central, reps_per_layer, K, rng)
    return report
