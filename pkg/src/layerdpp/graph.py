"""Undirected attributed graphs, text-format IO, BFS, candidate sets and generators."""

from __future__ import annotations

import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


class EmptyCandidateSetError(ValueError):
    """Raised when a node has no usable negative candidates."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with node features, labels and split masks.

    ``adjacency[i]`` is a sorted tuple of neighbours; both directions are
    stored and self-loops are never stored.
    """

    num_nodes: int
    adjacency: tuple[tuple[int, ...], ...]
    features: np.ndarray
    labels: np.ndarray
    train: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    val: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    test: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        n = self.num_nodes
        if len(self.adjacency) != n:
            raise ValueError("adjacency length does not match num_nodes")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"feature matrix must have {n} rows")
        if self.labels.shape != (n,):
            raise ValueError(f"labels must have {n} entries")
        seen: set[int] = set()
        for name in ("train", "val", "test"):
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} mask index out of range")
            s = set(idx.tolist())
            if s & seen:
                raise ValueError("train/val/test masks must be disjoint")
            seen |= s
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if j == i:
                    raise ValueError(f"self-loop on node {i}")
                if i not in self._neighbour_sets[j]:
                    raise ValueError(f"asymmetric adjacency between {i} and {j}")

    @cached_property
    def _neighbour_sets(self) -> list[frozenset[int]]:
        return [frozenset(nbrs) for nbrs in self.adjacency]

    @classmethod
    def from_edges(cls, num_nodes, edges, features, labels=None, splits=None) -> "Graph":
        """Build a graph from an iterable of (u, v) pairs; duplicates are merged."""
        nbrs: list[set[int]] = [set() for _ in range(num_nodes)]
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ValueError(f"edge ({u}, {v}) references a node >= {num_nodes}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        if labels is None:
            labels = np.full(num_nodes, -1, dtype=np.int64)
        splits = splits or {}
        return cls(
            num_nodes=num_nodes,
            adjacency=tuple(tuple(sorted(s)) for s in nbrs),
            features=np.asarray(features, dtype=np.float64),
            labels=np.asarray(labels, dtype=np.int64),
            train=np.asarray(sorted(splits.get("train", [])), dtype=np.int64),
            val=np.asarray(sorted(splits.get("val", [])), dtype=np.int64),
            test=np.asarray(sorted(splits.get("test", [])), dtype=np.int64),
        )

    def neighbours(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._neighbour_sets[i]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return int(self.degrees.sum()) // 2

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        lab = self.labels[self.labels >= 0]
        return int(lab.max()) + 1 if lab.size else 0

    def edges(self) -> list[tuple[int, int]]:
        """Each undirected edge once, as (u, v) with u < v."""
        return [(i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j]

    @cached_property
    def norm_adj(self) -> sp.csr_matrix:
        """Symmetric-normalised adjacency with self-loops, D~^-1/2 (A + I) D~^-1/2."""
        n = self.num_nodes
        rows, cols = [], []
        for i, nbrs in enumerate(self.adjacency):
            rows.append(i)
            cols.append(i)
            rows.extend([i] * len(nbrs))
            cols.extend(nbrs)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        inv_sqrt = 1.0 / np.sqrt(self.degrees + 1.0)
        vals = inv_sqrt[rows] * inv_sqrt[cols]
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph on ``nodes`` with ids re-indexed densely in the given order."""
        nodes = list(nodes)
        remap = {old: new for new, old in enumerate(nodes)}
        edges = [
            (remap[u], remap[v])
            for u in nodes
            for v in self.adjacency[u]
            if v in remap and u < v
        ]

        def _mask(idx):
            return [remap[i] for i in idx.tolist() if i in remap]

        return Graph.from_edges(
            len(nodes),
            edges,
            self.features[nodes],
            self.labels[nodes],
            {"train": _mask(self.train), "val": _mask(self.val), "test": _mask(self.test)},
        )


@dataclass(frozen=True)
class CandidateSet:
    center: int
    members: tuple[int, ...]
    path_length: int

    def __len__(self):
        return len(self.members)


# ---------------------------------------------------------------------------
# file IO


def _read_lines(path: Path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise GraphFormatError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def load_graph(edges_path, features_path, labels_path=None, splits_path=None) -> Graph:
    """Load a graph from the edges/features/labels/splits text format.

    The node count is taken from the number of feature rows.  Duplicate and
    reversed edge lines collapse into one undirected edge.
    """
    features_path = Path(features_path)
    rows = []
    for lineno, line in _read_lines(features_path):
        try:
            rows.append([float(x) for x in line.split()])
        except ValueError as exc:
            raise GraphFormatError(f"{features_path}:{lineno}: {exc}") from exc
        if rows and len(rows[-1]) != len(rows[0]):
            raise GraphFormatError(
                f"{features_path}:{lineno}: expected {len(rows[0])} values, got {len(rows[-1])}"
            )
    n = len(rows)
    features = np.array(rows, dtype=np.float64).reshape(n, -1 if n else 0)

    edges_path = Path(edges_path)
    edges = []
    for lineno, line in _read_lines(edges_path):
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{edges_path}:{lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphFormatError(f"{edges_path}:{lineno}: {exc}") from exc
        if u < 0 or v < 0 or u >= n or v >= n:
            raise GraphFormatError(
                f"{edges_path}:{lineno}: node id out of range for {n} feature rows"
            )
        if u == v:
            raise GraphFormatError(f"{edges_path}:{lineno}: self-loop {u} {v} not allowed")
        edges.append((u, v))

    labels = np.full(n, -1, dtype=np.int64)
    if labels_path is not None:
        labels_path = Path(labels_path)
        vals = []
        for lineno, line in _read_lines(labels_path):
            try:
                vals.append(int(line))
            except ValueError as exc:
                raise GraphFormatError(f"{labels_path}:{lineno}: {exc}") from exc
        if len(vals) != n:
            raise GraphFormatError(f"{labels_path}: expected {n} labels, got {len(vals)}")
        labels = np.array(vals, dtype=np.int64)

    splits = None
    if splits_path is not None:
        splits_path = Path(splits_path)
        try:
            splits = json.loads(splits_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise GraphFormatError(f"{splits_path}: {exc}") from exc
        for key in ("train", "val", "test"):
            idx = splits.get(key, [])
            if any((not isinstance(i, int)) or i < 0 or i >= n for i in idx):
                raise GraphFormatError(f"{splits_path}: bad index in {key!r}")

    try:
        return Graph.from_edges(n, edges, features, labels, splits)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from exc


def load_dataset(directory) -> Graph:
    """Load ``edges.txt``, ``features.txt``, ``labels.txt`` and ``splits.json`` from a directory."""
    d = Path(directory)
    if not d.is_dir():
        raise GraphFormatError(f"{d}: dataset directory not found")
    labels = d / "labels.txt"
    splits = d / "splits.json"
    return load_graph(
        d / "edges.txt",
        d / "features.txt",
        labels if labels.exists() else None,
        splits if splits.exists() else None,
    )


def save_graph(g: Graph, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in g.edges()))
    # %.17g round-trips every float64 exactly
    (d / "features.txt").write_text(
        "".join(" ".join(f"{x:.17g}" for x in row) + "\n" for row in g.features)
    )
    (d / "labels.txt").write_text("".join(f"{int(y)}\n" for y in g.labels))
    (d / "splits.json").write_text(
        json.dumps({k: getattr(g, k).tolist() for k in ("train", "val", "test")})
    )
    return d


# ---------------------------------------------------------------------------
# traversal and candidates


def bfs_levels(g: Graph, i: int) -> dict[int, int]:
    """Hop distance from ``i`` to every reachable node."""
    if not 0 <= i < g.num_nodes:
        raise IndexError(f"node {i} out of range")
    dist = {i: 0}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in g.adjacency[u]:
            if v not in dist:
                dist[v] = du
                queue.append(v)
    return dist


def connected_components(g: Graph) -> list[list[int]]:
    """Components as sorted node lists, largest first (ties by smallest node id)."""
    seen = np.zeros(g.num_nodes, dtype=bool)
    comps = []
    for s in range(g.num_nodes):
        if seen[s]:
            continue
        comp = sorted(bfs_levels(g, s))
        seen[comp] = True
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def is_connected(g: Graph) -> bool:
    return g.num_nodes > 0 and len(bfs_levels(g, 0)) == g.num_nodes


def largest_component(g: Graph) -> Graph:
    comps = connected_components(g)
    if len(comps) <= 1:
        return g
    return g.subgraph(comps[0])


def build_candidate_set(g: Graph, i: int, P: int, rng: np.random.Generator) -> CandidateSet:
    """Shortest-path candidate pool for node ``i``.

    For every path length p in 2..P one node at that distance is drawn and it
    and its neighbours join the pool.  ``i`` and its neighbours are removed
    at the end, so members are never positive samples.
    """
    if P < 2:
        raise ValueError("path length P must be >= 2")
    levels = bfs_levels(g, i)
    by_dist: dict[int, list[int]] = {}
    for node, d in levels.items():
        by_dist.setdefault(d, []).append(node)
    pool: set[int] = set()
    for p in range(2, P + 1):
        ring = by_dist.get(p)
        if not ring:
            continue
        j = sorted(ring)[int(rng.integers(len(ring)))]
        pool.add(j)
        pool.update(g.adjacency[j])
    pool.discard(i)
    pool.difference_update(g.adjacency[i])
    if not pool:
        raise EmptyCandidateSetError(f"node {i} has no candidates within path length {P}")
    return CandidateSet(center=i, members=tuple(sorted(pool)), path_length=P)


def select_central_nodes(g: Graph, fraction: float, rng: np.random.Generator) -> list[int]:
    """Sample ceil(fraction * N) nodes among those with above-average degree."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    deg = g.degrees
    pool = np.flatnonzero(deg > deg.mean())
    if pool.size == 0:
        warnings.warn("no node has degree above the mean; no central nodes selected")
        return []
    want = math.ceil(fraction * g.num_nodes)
    if pool.size <= want:
        return pool.tolist()
    return sorted(rng.choice(pool, size=want, replace=False).tolist())


# ---------------------------------------------------------------------------
# generators


def random_split(labels, ratios=(0.1, 0.2, 0.7), rng=None) -> dict[str, list[int]]:
    """Stratified train/val/test split of the labelled nodes by the given ratios."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) > 1 + 1e-9:
        raise ValueError("ratios must be three non-negative numbers summing to <= 1")
    labels = np.asarray(labels)
    out = {"train": [], "val": [], "test": []}
    for c in np.unique(labels[labels >= 0]):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr = int(round(ratios[0] * idx.size))
        n_va = int(round(ratios[1] * idx.size))
        n_te = min(idx.size - n_tr - n_va, int(round(ratios[2] * idx.size)))
        out["train"] += idx[:n_tr].tolist()
        out["val"] += idx[n_tr:n_tr + n_va].tolist()
        out["test"] += idx[n_tr + n_va:n_tr + n_va + n_te].tolist()
    return {k: sorted(v) for k, v in out.items()}


def generate_sbm(
    blocks: Sequence[int],
    p_in: float,
    p_out: float,
    feature_dim: int | None = None,
    rng: np.random.Generator | None = None,
    *,
    split=(0.1, 0.2, 0.7),
    noise: float = 0.1,
    max_tries: int = 20,
) -> Graph:
    """Stochastic block model with noisy one-hot block features.

    Redraws up to ``max_tries`` times looking for a connected sample and
    keeps the largest component of the last draw otherwise.
    """
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("edge probabilities must lie in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng(0)
    blocks = [int(b) for b in blocks]
    n = sum(blocks)
    feature_dim = feature_dim or len(blocks)
    if feature_dim < len(blocks):
        raise ValueError("feature_dim must be at least the number of blocks")
    labels = np.repeat(np.arange(len(blocks)), blocks)
    iu, ju = np.triu_indices(n, k=1)
    probs = np.where(labels[iu] == labels[ju], p_in, p_out)
    for _ in range(max_tries):
        keep = rng.random(iu.size) < probs
        features = np.zeros((n, feature_dim))
        features[np.arange(n), labels] = 1.0
        features += noise * rng.standard_normal((n, feature_dim))
        g = Graph.from_edges(n, zip(iu[keep], ju[keep]), features, labels)
        if is_connected(g):
            break
    g = largest_component(g)
    splits = random_split(g.labels, split, rng)
    return Graph.from_edges(g.num_nodes, g.edges(), g.features, g.labels, splits)


@dataclass
class BottleneckResult:
    graph: Graph
    communities: np.ndarray
    removed: list[int]
    original_ids: list[int]  # id in the input graph of each output node

    def inter_community_edges(self) -> list[tuple[int, int]]:
        c = self.communities
        return [(u, v) for u, v in self.graph.edges() if c[u] != c[v]]


def _inter_edges(g: Graph, alive: np.ndarray, comm: np.ndarray) -> list[tuple[int, int]]:
    return [
        (u, v)
        for u, v in g.edges()
        if alive[u] and alive[v] and comm[u] != comm[v]
    ]


def build_bottleneck_graph(
    g: Graph, Q: int, rng: np.random.Generator, *, max_iter: int = 100
) -> BottleneckResult:
    """Cut a graph down until a single edge joins different communities.

    Nodes incident to inter-community edges are deleted one at a time
    (never the one whose removal would leave no inter-community edge) until
    exactly one such edge remains; the largest connected remainder is kept.
    """
    from .clustering import fluid_communities

    if Q < 2:
        raise ValueError("Q must be >= 2")
    comm = fluid_communities(g, Q, rng, max_iter=max_iter).assignment
    alive = np.ones(g.num_nodes, dtype=bool)
    removed: list[int] = []
    inter = _inter_edges(g, alive, comm)
    while len(inter) > 1:
        touch: dict[int, int] = {}
        for u, v in inter:
            touch[u] = touch.get(u, 0) + 1
            touch[v] = touch.get(v, 0) + 1
        choices = sorted(u for u, cnt in touch.items() if cnt < len(inter))
        victim = choices[int(rng.integers(len(choices)))]
        alive[victim] = False
        removed.append(victim)
        inter = [(u, v) for u, v in inter if victim not in (u, v)]

    keep = np.flatnonzero(alive).tolist()
    rest = g.subgraph(keep)
    rest_comm = comm[keep]
    comps = connected_components(rest)
    main = comps[0] if comps else []
    if inter:
        # keep the component carrying the bottleneck edge
        u, v = inter[0]
        pos = {old: new for new, old in enumerate(keep)}
        for comp in comps:
            if pos[u] in comp:
                main = comp
                break
    if len(main) < 2 * Q:
        raise ValueError(
            f"bottleneck construction degenerated to {len(main)} nodes (< 2*Q = {2 * Q})"
        )
    out = rest.subgraph(main)
    return BottleneckResult(
        graph=out,
        communities=rest_comm[main],
        removed=removed,
        original_ids=[keep[x] for x in main],
    )
