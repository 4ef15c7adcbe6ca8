"""Fluid Communities, k-means, and the community/candidate feature means."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import CandidateSet, Graph, is_connected


@dataclass
class Communities:
    Q: int
    assignment: np.ndarray
    iterations: int = 0

    def members(self, q: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == q)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.Q)


@dataclass
class Clustering:
    K: int
    assignment: np.ndarray
    centroids: np.ndarray
    objective_trace: list[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else 0.0


def fluid_communities(g: Graph, Q: int, rng: np.random.Generator, max_iter: int = 100) -> Communities:
    """Partition a connected graph into ``Q`` communities by fluid propagation.

    Each community carries total density 1 spread evenly over its nodes.
    Nodes are visited in a fresh random order every sweep and join the
    community with the largest density summed over themselves and their
    neighbours.  A node keeps its community on ties; otherwise ties go to
    the lowest community id.  Stops after a sweep with no change or after
    ``max_iter`` sweeps.
    """
    n = g.num_nodes
    if not 1 <= Q <= n:
        raise ValueError(f"Q must lie in [1, {n}]")
    if not is_connected(g):
        raise ValueError("fluid communities need a connected graph; pass the largest component")

    assign = np.full(n, -1, dtype=np.int64)
    seeds = rng.permutation(n)[:Q]
    assign[seeds] = np.arange(Q)
    size = np.ones(Q, dtype=np.int64)
    density = np.ones(Q)
    adjacency = g.adjacency

    it = 0
    changed = True
    while changed and it < max_iter:
        changed = False
        it += 1
        for v in rng.permutation(n).tolist():
            score: dict[int, float] = {}
            cur = int(assign[v])
            if cur >= 0:
                score[cur] = density[cur]
            for u in adjacency[v]:
                c = int(assign[u])
                if c >= 0:
                    score[c] = score.get(c, 0.0) + density[c]
            if not score:
                continue
            best = max(score.values())
            tied = [c for c, s in score.items() if best - s < 1e-12]
            if cur in tied:
                continue
            new = min(tied)
            changed = True
            if cur >= 0:
                size[cur] -= 1
                density[cur] = 1.0 / size[cur]
            assign[v] = new
            size[new] += 1
            density[new] = 1.0 / size[new]

    if (assign < 0).any():
        raise RuntimeError("fluid communities left nodes unassigned")
    return Communities(Q=Q, assignment=assign, iterations=it)


def community_features(reps: np.ndarray, c: Communities) -> np.ndarray:
    """Row q is the mean representation of the nodes in community q."""
    reps = np.asarray(reps, dtype=np.float64)
    if reps.shape[0] != c.assignment.shape[0]:
        raise ValueError("representation rows must match the community assignment")
    sums = np.zeros((c.Q, reps.shape[1]))
    np.add.at(sums, c.assignment, reps)
    counts = np.bincount(c.assignment, minlength=c.Q)
    if (counts == 0).any():
        raise ValueError("empty community")
    return sums / counts[:, None]


def candidate_features(reps: np.ndarray, s: CandidateSet) -> np.ndarray:
    """Mean representation over the candidate set members."""
    if len(s.members) == 0:
        raise ValueError("candidate set is empty")
    return np.asarray(reps, dtype=np.float64)[list(s.members)].mean(axis=0)


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkf,nkf->nk", diff, diff)


def _kmeans_pp(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    d2 = ((points - points[first]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            # all remaining mass sits on chosen points
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points: np.ndarray, K: int, rng: np.random.Generator, iters: int = 50) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding and Euclidean distance.

    An emptied cluster is re-seeded at the point farthest from its current
    centroid.  ``objective_trace`` holds the within-cluster sum of squares
    after every assignment step.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must lie in [1, {n}]")
    centroids = _kmeans_pp(points, K, rng)
    trace: list[float] = []
    assign = np.full(n, -1, dtype=np.int64)
    converged = False
    for _ in range(iters):
        d2 = _sq_dists(points, centroids)
        new_assign = d2.argmin(axis=1)
        best = d2[np.arange(n), new_assign]
        empty = np.flatnonzero(np.bincount(new_assign, minlength=K) == 0)
        if empty.size:
            for k in empty:
                far = int(best.argmax())
                centroids[k] = points[far]
                best[far] = 0.0
            continue
        trace.append(float(best.sum()))
        if np.array_equal(new_assign, assign):
            converged = True
            break
        assign = new_assign
        for k in range(K):
            centroids[k] = points[assign == k].mean(axis=0)
    if not converged:
        d2 = _sq_dists(points, centroids)
        assign = d2.argmin(axis=1)
        trace.append(float(d2[np.arange(n), assign].sum()))
    return Clustering(K=K, assignment=assign, centroids=centroids, objective_trace=trace)


def default_num_communities(g: Graph) -> int:
    """Class count when labels exist, else ceil(sqrt(N))."""
    if g.num_classes >= 2:
        return min(g.num_classes, g.num_nodes)
    return max(1, int(np.ceil(np.sqrt(g.num_nodes))))
