"""Training loop: per-epoch community detection, layer-wise negative sampling, Adam."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .clustering import community_features, default_num_communities, fluid_communities
from .config import ExperimentConfig, stream
from .dpp import SampleRecord, SampleStore, default_k, sample_negatives
from .gnn import (
    AdamState,
    ForwardCache,
    ModelParams,
    adam_step,
    backward,
    cross_entropy,
    forward,
    gcn_layer_forward,
    init_params,
    neg_gcn_layer_forward,
    negative_matrix,
)
from .graph import CandidateSet, EmptyCandidateSetError, Graph, build_candidate_set, select_central_nodes
from .metrics import accuracy, mad, overlap_report, ovr_node

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    params: ModelParams
    history: list[dict]
    stores: list[SampleStore]
    central: list[int]
    candidates: dict[int, CandidateSet]
    cache: ForwardCache | None = None
    records: list[list[tuple[int, SampleRecord]]] = field(default_factory=list)  # per epoch


def prepare_candidates(g: Graph, config: ExperimentConfig):
    """Central nodes and their candidate sets; nodes with no candidates are dropped."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        central = select_central_nodes(g, config.central_fraction, stream(config.seed, "central"))
    candidates = {}
    for i in central:
        try:
            candidates[i] = build_candidate_set(g, i, config.P, stream(config.seed, "candidates", i))
        except EmptyCandidateSetError:
            log.info("node %d skipped: empty candidate set", i)
    return central, candidates


def sample_pass(params: ModelParams, g: Graph, communities, candidates, config: ExperimentConfig,
                epoch: int, layer_diverse: bool = True):
    """Draw negatives layer by layer on the representations entering each layer.

    Layer ``l`` is conditioned on the layer ``l - 1`` draw of the same pass
    when ``layer_diverse`` is set.  Returns the store and (layer, record) pairs.
    """
    L = params.num_layers
    store = SampleStore.empty(L)
    records: list[tuple[int, SampleRecord]] = []
    H = g.features
    for l in range(L):
        feats = community_features(H, communities)
        for i in sorted(candidates):
            s = candidates[i]
            prev = store.get(l - 1, i) if l > 0 else ()
            rec = sample_negatives(
                g, H, s, prev, default_k(len(s), config.k_fraction), config.gamma,
                stream(config.seed, "sampling", epoch, l, i), communities,
                layer_diverse=layer_diverse, comm_feats=feats,
            )
            store.set(l, i, rec.sampled)
            records.append((l, rec))
        if l < L - 1:
            Z = neg_gcn_layer_forward(H, g, params.weights[l], negative_matrix(g, store.layers[l]), params.mu)
            H = np.maximum(Z, 0.0)
    return store, records


def plain_forward(params: ModelParams, g: Graph):
    """Reference GCN forward pass with no negative-sample machinery."""
    H = g.features
    inputs, pre, post = [], [], []
    L = params.num_layers
    for l, W in enumerate(params.weights):
        Z = gcn_layer_forward(H, g, W)
        inputs.append(H)
        pre.append(Z)
        H = np.maximum(Z, 0.0) if l < L - 1 else Z
        post.append(H)
    cache = ForwardCache(inputs, pre, post, [None] * L, params.mu, params.weights,
                         g.norm_adj, SampleStore.empty(L))
    return H, cache


def _cls_key(mult: int) -> str:
    return "ovr_cls" if mult == 1 else f"ovr_{mult}cls"


def train(g: Graph, config: ExperimentConfig, *, plain: bool = False) -> TrainResult:
    """Train a GCN with negative samples; ``plain`` runs the bare GCN path instead."""
    seed = config.seed
    num_classes = max(g.num_classes, 1)
    mu0 = 0.0 if plain else config.mu_init
    params = init_params(g.num_features, config.hidden, num_classes, config.layers,
                         stream(seed, "init"), mu0)
    use_sampler = (not plain) and config.sampler != "none"
    central, candidates = prepare_candidates(g, config) if use_sampler else ([], {})
    Q = config.Q or default_num_communities(g)
    state = AdamState()
    history, stores, all_records = [], [], []
    cache = None
    for epoch in range(config.epochs):
        if use_sampler and candidates:
            comm = fluid_communities(g, Q, stream(seed, "communities", epoch))
            store, records = sample_pass(params, g, comm, candidates, config, epoch,
                                         layer_diverse=config.sampler == "layer-diverse")
        else:
            store, records = SampleStore.empty(config.layers), []
        if plain:
            logits, cache = plain_forward(params, g)
        else:
            logits, cache = forward(params, g, store)
        loss = cross_entropy(logits, g.labels, g.train)
        rec = {
            "epoch": epoch,
            "loss": loss,
            "train_acc": accuracy(logits, g.labels, g.train) if g.train.size else None,
            "val_acc": accuracy(logits, g.labels, g.val) if g.val.size else None,
            "test_acc": accuracy(logits, g.labels, g.test) if g.test.size else None,
            "mu": params.mu,
            "ovr_node": None,
        }
        for m in config.cls_multipliers:
            rec[_cls_key(m)] = None
        rec["mad"] = None
        active = sorted(candidates)
        if use_sampler and config.layers >= 2 and active:
            try:
                rec["ovr_node"] = ovr_node(store, active)
            except ValueError:
                pass
        last = epoch == config.epochs - 1
        if epoch % config.metrics_every == 0 or last:
            rec["mad"] = mad(logits)
            if rec["ovr_node"] is not None:
                report = overlap_report(store, active, cache.post, num_classes,
                                        config.cls_multipliers, stream(seed, "kmeans", epoch))
                for m, v in report.ovr_cls.items():
                    rec[_cls_key(m)] = v
        history.append(rec)
        stores.append(store)
        if config.dump_samples:
            all_records.append(records)
        grads = backward(cache, g.labels, g.train)
        params, state = adam_step(params, grads, state, lr=config.lr,
                                  train_mu=config.train_mu and not plain)
    return TrainResult(params, history, stores, central, candidates, cache, all_records)


def summarize(result: TrainResult, config: ExperimentConfig) -> dict:
    """Stable, versioned run summary."""
    hist = result.history
    final = hist[-1] if hist else {}

    def _mean(key):
        vals = [h[key] for h in hist if h.get(key) is not None]
        return float(np.mean(vals)) if vals else None

    best = None
    if hist and hist[0].get("val_acc") is not None:
        best = max(hist, key=lambda h: (h["val_acc"], -h["epoch"]))
    ovr = {"ovr_node": _mean("ovr_node")}
    for m in config.cls_multipliers:
        ovr[_cls_key(m)] = _mean(_cls_key(m))
    return {
        "schema": 1,
        "config": config.to_dict(),
        "epochs": len(hist),
        "final": {k: final.get(k) for k in ("loss", "train_acc", "val_acc", "test_acc")},
        "best_val": None if best is None else {
            "epoch": best["epoch"], "val_acc": best["val_acc"], "test_acc": best["test_acc"],
        },
        "test_acc": final.get("test_acc"),
        "mu": result.params.mu,
        "ovr": ovr,
        "mad": final.get("mad"),
        "central_nodes": result.central,
        "sampled_nodes": sorted(result.candidates),
    }
