"""Quality/diversity L-ensembles, Jacobi eigendecomposition, k-DPP sampling and space squeezing.

Negative candidates for a central node ``i`` get a kernel built from cosine
similarities between node representations and community means.  Sampling
for layer ``l`` can be conditioned on the nodes drawn at layer ``l - 1`` by
squeezing the eigenvector matrix along each earlier pick's dominant
direction, which scales that pick's row norm by ``1 - gamma``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .clustering import Communities, candidate_features, community_features
from .graph import CandidateSet, Graph


class RankDeficientError(ValueError):
    """The kernel has fewer positive eigenvalues than requested samples."""


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Kernel:
    members: tuple[int, ...]
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class EigenBasis:
    """Eigenpairs of a kernel; rows of ``vectors`` follow ``members``."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    members: tuple[int, ...]
    squeezed: bool = False

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > 0))

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.vectors.T


@dataclass
class ESPTable:
    """``table[l, v]`` = e_l(lambda_1, ..., lambda_v)."""

    table: np.ndarray

    @property
    def k(self) -> int:
        return self.table.shape[0] - 1

    def __getitem__(self, idx):
        return self.table[idx]

    @property
    def total(self) -> float:
        return float(self.table[-1, -1])


@dataclass
class SampleStore:
    """Per-layer negative samples; ``layers[l][i]`` holds node i's samples at layer l + 1."""

    layers: list[dict[int, tuple[int, ...]]] = field(default_factory=list)

    @classmethod
    def empty(cls, num_layers: int) -> "SampleStore":
        return cls([{} for _ in range(num_layers)])

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def get(self, layer: int, node: int) -> tuple[int, ...]:
        return self.layers[layer].get(node, ())

    def set(self, layer: int, node: int, samples) -> None:
        self.layers[layer][node] = tuple(sorted(int(x) for x in samples))

    def to_json(self) -> list[dict[str, list[int]]]:
        return [{str(i): list(s) for i, s in sorted(layer.items())} for layer in self.layers]

    @classmethod
    def from_json(cls, data) -> "SampleStore":
        return cls([{int(i): tuple(s) for i, s in layer.items()} for layer in data])


@dataclass
class SampleRecord:
    node: int
    members: tuple[int, ...]
    eigenvalues: list[float]
    sampled: tuple[int, ...]
    squeezed_rows: list[int]

    def to_json(self) -> dict:
        return {
            "node": self.node,
            "members": list(self.members),
            "eigenvalues": self.eigenvalues,
            "sampled": list(self.sampled),
            "squeezed_rows": self.squeezed_rows,
        }


# ---------------------------------------------------------------------------
# kernel construction


def _cos(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, x / safe, 0.0)


def quality_term(a_i, b_i, a_jbar) -> float:
    """cos(a_i, b_i) * cos(a_i, a_jbar); zero-norm vectors give cosine 0."""
    return _cos(np.asarray(a_i, float), np.asarray(b_i, float)) * _cos(
        np.asarray(a_i, float), np.asarray(a_jbar, float)
    )


def diversity_term(h_j, h_jp, a_j, a_jp) -> float:
    """cos(h_j, a_j') * cos(a_j, h_j') * exp(cos(h_j, h_j') - 1)."""
    h_j, h_jp = np.asarray(h_j, float), np.asarray(h_jp, float)
    a_j, a_jp = np.asarray(a_j, float), np.asarray(a_jp, float)
    return _cos(h_j, a_jp) * _cos(a_j, h_jp) * math.exp(_cos(h_j, h_jp) - 1.0)


def build_kernel(
    g: Graph,
    reps: np.ndarray,
    s: CandidateSet,
    c: Communities,
    comm_feats: np.ndarray | None = None,
) -> Kernel:
    """L[j, j'] = q_j * phi_j.phi_j' * q_j' over the members of ``s``.

    ``comm_feats`` may carry precomputed community means for ``reps``.
    """
    if not s.members:
        raise ValueError("candidate set is empty")
    reps = np.asarray(reps, dtype=np.float64)
    if comm_feats is None:
        comm_feats = community_features(reps, c)
    members = list(s.members)
    a_i = comm_feats[c.assignment[s.center]]
    b_i = candidate_features(reps, s)

    H = _unit_rows(reps[members])
    A = _unit_rows(comm_feats[c.assignment[members]])
    ua = _unit_rows(a_i)
    q = _cos(a_i, b_i) * (A @ ua)
    cos_ha = H @ A.T  # [j, j'] = cos(h_j, a_j')
    cos_hh = H @ H.T
    phi = cos_ha * cos_ha.T * np.exp(cos_hh - 1.0)
    L = q[:, None] * phi * q[None, :]
    L = 0.5 * (L + L.T)
    return Kernel(members=tuple(s.members), matrix=L)


# ---------------------------------------------------------------------------
# eigendecomposition


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of 0..m-1 (m even) so every pair meets once per m - 1 rounds."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array([min(players[i], players[m - 1 - i]) for i in range(m // 2)])
        q = np.array([max(players[i], players[m - 1 - i]) for i in range(m // 2)])
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Cyclic Jacobi for a real symmetric matrix, returning (eigenvalues, vectors).

    Each sweep visits every off-diagonal pair once in round-robin order;
    rotations inside a round act on disjoint index pairs, so a whole round is
    one orthogonal similarity.  Converged once the off-diagonal Frobenius norm
    drops below ``tol * ||a||_F``.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    if n < 2:
        return np.diag(a).copy(), np.eye(n)
    m = n + (n % 2)
    rounds = []
    for p, q in _round_robin(m):
        keep = q < n
        rounds.append((p[keep], q[keep]))
    target = tol * np.linalg.norm(a)
    offdiag = ~np.eye(n, dtype=bool)
    J = np.eye(n)
    av = np.vstack([a, np.eye(n)])  # top block is a, bottom block accumulates vectors

    def off():
        return math.sqrt(float(np.sum(av[:n][offdiag] ** 2)))

    for _ in range(max_sweeps + 1):
        if off() <= target:
            return np.diag(av[:n]).copy(), av[n:].copy()
        if _ == max_sweeps:
            break
        with np.errstate(over="ignore"):
            for p, q in rounds:
                apq = av[p, q]
                active = np.abs(apq) > 1e-300
                if not active.any():
                    continue
                p, q, apq = p[active], q[active], apq[active]
                theta = (av[q, q] - av[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t[theta == 0] = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                av = av @ J
                av[:n] = J.T @ av[:n]
                J[p, p] = 1.0
                J[q, q] = 1.0
                J[p, q] = 0.0
                J[q, p] = 0.0
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def eig_sym(k: Kernel | np.ndarray, members=None) -> EigenBasis:
    """Eigendecompose a kernel; tiny and negative eigenvalues are clamped to 0.

    Eigenpairs come back sorted by ascending eigenvalue.
    """
    if isinstance(k, Kernel):
        mat, members = k.matrix, k.members
    else:
        mat = np.asarray(k, dtype=np.float64)
        members = tuple(range(mat.shape[0])) if members is None else tuple(members)
    lam, vec = jacobi_eigh(mat)
    order = np.argsort(lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    top = lam.max(initial=0.0)
    lam = np.where(lam < 1e-12 * top, 0.0, lam) if top > 0 else np.zeros_like(lam)
    return EigenBasis(eigenvalues=lam, vectors=vec, members=members)


# ---------------------------------------------------------------------------
# k-DPP


def esp(eigenvalues, k: int) -> ESPTable:
    """Elementary symmetric polynomials e_l over prefixes of ``eigenvalues``, l = 0..k."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    S = lam.size
    if k > S:
        raise ValueError(f"k={k} exceeds the number of eigenvalues {S}")
    E = np.zeros((k + 1, S + 1))
    E[0, :] = 1.0
    for v in range(1, S + 1):
        E[1:, v] = E[1:, v - 1] + lam[v - 1] * E[:-1, v - 1]
    return ESPTable(E)


def _select_eigenvectors(lam: np.ndarray, E: np.ndarray, k: int, u: np.ndarray) -> np.ndarray:
    """Phase one for a batch: boolean (n, S) mask of the chosen eigenvectors.

    ``u`` holds one uniform per draw and eigen-index.  Scanning v = S..1, an
    eigenvector is kept with probability lambda_v e_{l-1}^{v-1} / e_l^v
    where l is the number still to pick.
    """
    n, S = u.shape
    rem = np.full(n, k, dtype=np.int64)
    chosen = np.zeros((n, S), dtype=bool)
    for v in range(S, 0, -1):
        live = rem > 0
        if not live.any():
            break
        r = rem[live]
        denom = E[r, v]
        with np.errstate(divide="ignore", invalid="ignore"):
            marg = np.where(denom > 0, lam[v - 1] * E[r - 1, v - 1] / denom, 0.0)
        take = u[live, v - 1] < marg
        idx = np.flatnonzero(live)[take]
        chosen[idx, v - 1] = True
        rem[idx] -= 1
    return chosen


def _orthonormalize(V: np.ndarray, drop: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt on the columns of each (S, c) slice of ``V``.

    Columns whose residual norm falls below ``drop`` are zeroed, which
    removes them from the vector set.
    """
    V = V.copy()
    c = V.shape[2]
    for j in range(c):
        w = V[:, :, j]
        for t in range(j):
            u = V[:, :, t]
            w -= np.einsum("ns,ns->n", u, w)[:, None] * u
        nrm = np.linalg.norm(w, axis=1)
        ok = nrm >= drop
        w[ok] /= nrm[ok, None]
        w[~ok] = 0.0
    return V


def _sample_items(V: np.ndarray, k: int, u: np.ndarray) -> np.ndarray:
    """Phase two for a batch of vector sets ``V`` (n, S, k); returns (n, k) rows, -1 when exhausted."""
    n, S, _ = V.shape
    out = np.full((n, k), -1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    rows = np.arange(n)
    for step in range(k):
        probs = np.einsum("nsc,nsc->ns", V, V)
        taken = out[:, :step]
        if step:
            probs[rows[:, None], np.where(taken >= 0, taken, 0)] *= (taken < 0)
        total = probs.sum(axis=1)
        exhausted = alive & ~(V != 0).any(axis=(1, 2))
        alive &= ~exhausted
        if not alive.any():
            break
        if (alive & ~(total > 0)).any():
            raise ValueError("all item probabilities vanished during k-DPP sampling")
        cum = np.cumsum(probs, axis=1)
        target = u[:, step] * total
        i = (cum <= target[:, None]).sum(axis=1)
        i = np.minimum(i, S - 1)
        # a draw landing past a trailing zero-width bin moves to the last positive one
        bad = alive & (probs[rows, i] <= 0)
        if bad.any():
            last_pos = S - 1 - np.argmax(probs[bad][:, ::-1] > 0, axis=1)
            i[bad] = last_pos
        out[alive, step] = i[alive]
        row = V[rows, i, :]
        piv = np.argmax(np.abs(row), axis=1)
        pv = row[rows, piv]
        safe = np.where(pv != 0, pv, 1.0)
        V = V - V[rows, :, piv][:, :, None] * (row / safe[:, None])[:, None, :]
        c = V.shape[2]
        keep = np.arange(c)[None, :] != piv[:, None]
        idx = np.nonzero(keep)[1].reshape(n, c - 1)
        V = np.take_along_axis(V, idx[:, None, :], axis=2)
        V = _orthonormalize(V)
        V[~alive] = 0.0
    return out


def sample_kdpp(
    basis: EigenBasis,
    k: int,
    rng: np.random.Generator,
    size: int | None = None,
    table: ESPTable | None = None,
):
    """Draw a size-k subset; returns row indices into ``basis.members``.

    Phase one picks k eigenvectors using the (original, unsqueezed)
    eigenvalues.  Phase two then repeatedly draws an item with probability
    proportional to its squared row norm over the current vector set and
    replaces the set by an orthonormal basis of its part orthogonal to that
    item's coordinate axis.  With ``size`` set, returns an (size, k) array
    of independent draws instead of one tuple.
    """
    S = basis.size
    if not 1 <= k <= S:
        raise ValueError(f"k must lie in [1, {S}]")
    lam = basis.eigenvalues
    if not basis.squeezed and k > basis.rank:
        raise RankDeficientError(f"rank deficient: k={k} but only {basis.rank} positive eigenvalues")
    E = (table if table is not None and table.k >= k else esp(lam, k)).table
    if not E[k, S] > 0:
        raise RankDeficientError(f"rank deficient: e_{k} of the eigenvalues is zero")
    n = 1 if size is None else int(size)
    chosen = _select_eigenvectors(lam, E, k, rng.random((n, S)))
    cols = np.nonzero(chosen)[1].reshape(n, k)
    V = np.transpose(basis.vectors[:, cols], (1, 0, 2))
    out = _sample_items(V, k, rng.random((n, k)))
    if size is None:
        return tuple(int(x) for x in out[0] if x >= 0)
    return out


def squeeze(basis: EigenBasis, jstar: int, gamma: float) -> EigenBasis:
    """Shrink row ``jstar`` of the eigenvector matrix by a factor 1 - gamma.

    The column m where the row is largest in magnitude is the squeeze
    direction; V' = V - gamma * outer(V[:, m], V[jstar] / V[jstar, m]).
    Rows that are (numerically) zero are left alone.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    V = basis.vectors
    row = V[jstar]
    if np.linalg.norm(row) <= 1e-12:
        return basis
    m = int(np.argmax(np.abs(row)))
    Vp = V - gamma * np.outer(V[:, m], row / row[m])
    return EigenBasis(eigenvalues=basis.eigenvalues, vectors=Vp, members=basis.members, squeezed=True)


def default_k(num_candidates: int, k_fraction: float = 0.2) -> int:
    return max(1, math.ceil(k_fraction * num_candidates))


def sample_negatives(
    g: Graph,
    reps: np.ndarray,
    s: CandidateSet,
    prev,
    k: int,
    gamma: float,
    rng: np.random.Generator,
    c: Communities,
    *,
    layer_diverse: bool = True,
    comm_feats: np.ndarray | None = None,
) -> SampleRecord:
    """Kernel, eigendecomposition, optional squeezing and a k-DPP draw for one node."""
    if k < 1:
        raise ValueError("k must be >= 1")
    members = s.members
    if len(members) <= k:
        return SampleRecord(s.center, members, [], tuple(members), [])
    kernel = build_kernel(g, reps, s, c, comm_feats)
    basis = eig_sym(kernel)
    if basis.rank < k:
        warnings.warn(
            f"node {s.center}: kernel rank {basis.rank} < k={k}; sampling {basis.rank} negatives"
        )
        k = basis.rank
    if k == 0:
        return SampleRecord(s.center, members, basis.eigenvalues.tolist(), (), [])
    squeezed_rows = []
    if layer_diverse and prev and gamma > 0:
        index = {node: r for r, node in enumerate(members)}
        for node in sorted(prev):
            r = index.get(node)
            if r is None:
                continue
            basis = squeeze(basis, r, gamma)
            squeezed_rows.append(r)
    rows = sample_kdpp(basis, k, rng)
    sampled = tuple(sorted(members[r] for r in rows))
    return SampleRecord(s.center, members, basis.eigenvalues.tolist(), sampled, squeezed_rows)


def layer_diverse_sample(g, reps, s, prev, k, gamma, rng, c, comm_feats=None) -> tuple[int, ...]:
    """Negatives for ``s.center`` at this layer, steered away from ``prev``."""
    return sample_negatives(g, reps, s, prev, k, gamma, rng, c, comm_feats=comm_feats).sampled


def sample_independent(g, reps, s, prev, k, gamma, rng, c, comm_feats=None) -> tuple[int, ...]:
    """Per-layer k-DPP negatives with no dependence on earlier layers."""
    return sample_negatives(
        g, reps, s, prev, k, gamma, rng, c, layer_diverse=False, comm_feats=comm_feats
    ).sampled
