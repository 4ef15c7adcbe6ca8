"""Hypothesis property tests for the structural invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from layerdpp import dpp
from layerdpp.dpp import SampleStore
from layerdpp.graph import EmptyCandidateSetError, Graph, build_candidate_set
from layerdpp.metrics import mad, ovr_node

from conftest import esp_brute, floyd_warshall

seeds = st.integers(0, 2**32 - 1)
SETTINGS = settings(max_examples=60, deadline=None)


def orthogonal(S, rng):
    q, _ = np.linalg.qr(rng.standard_normal((S, S)))
    return q


@st.composite
def graphs(draw, max_nodes=12):
    n = draw(st.integers(2, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), max_size=2 * n, unique=True))
    return Graph.from_edges(n, edges, np.eye(n))


@SETTINGS
@given(seeds, st.integers(2, 9), st.floats(0.0, 1.0))
def test_squeeze_scales_row(seed, S, gamma):
    rng = np.random.default_rng(seed)
    V = orthogonal(S, rng)
    j = int(rng.integers(S))
    out = dpp.squeeze(dpp.EigenBasis(np.ones(S), V, tuple(range(S))), j, gamma).vectors
    np.testing.assert_allclose(out[j], (1 - gamma) * V[j], atol=1e-12)


@SETTINGS
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8), st.integers(0, 8))
def test_esp_matches_enumeration(lam, k):
    k = min(k, len(lam))
    np.testing.assert_allclose(dpp.esp(lam, k).total, esp_brute(lam, k), rtol=1e-10, atol=1e-12)


@SETTINGS
@given(seeds, st.integers(1, 9))
def test_eigen_reconstruction(seed, S):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((S, S))
    L = B @ B.T
    basis = dpp.eig_sym(L)
    np.testing.assert_allclose(basis.reconstruct(), L, atol=1e-9 * max(1.0, np.abs(L).max()))
    np.testing.assert_allclose(basis.vectors.T @ basis.vectors, np.eye(S), atol=1e-10)
    assert (np.diff(basis.eigenvalues) >= 0).all() and (basis.eigenvalues >= 0).all()


@SETTINGS
@given(graphs(), st.integers(2, 6), seeds)
def test_candidate_set_invariants(g, P, seed):
    d = floyd_warshall(g)
    for i in range(g.num_nodes):
        try:
            s = build_candidate_set(g, i, P, np.random.default_rng(seed))
        except EmptyCandidateSetError:
            continue
        members = np.array(s.members)
        assert list(members) == sorted(set(s.members))
        assert i not in s.members and not any(g.has_edge(i, j) for j in s.members)
        # every member is a drawn ring node or one of its neighbours
        assert (d[i, members] >= 2).all() and (d[i, members] <= P + 1).all()


@SETTINGS
@given(seeds, st.integers(2, 4))
def test_ovr_node_relabel_invariant(seed, L):
    rng = np.random.default_rng(seed)
    n = 15
    central = sorted(rng.choice(n, size=3, replace=False).tolist())
    store = SampleStore.empty(L)
    for l in range(L):
        for i in central:
            store.set(l, i, rng.choice(n, size=int(rng.integers(1, 5)), replace=False))
    perm = rng.permutation(n)
    moved = SampleStore([{int(perm[i]): tuple(int(perm[j]) for j in s) for i, s in layer.items()}
                         for layer in store.layers])
    a = ovr_node(store, central)
    assert 0.0 <= a <= 1.0
    assert ovr_node(moved, [int(perm[i]) for i in central]) == a


@SETTINGS
@given(seeds, st.integers(2, 12), st.integers(1, 6))
def test_mad_row_scaling(seed, n, dim):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    scaled = x * rng.uniform(0.01, 100.0, size=(n, 1))
    base = mad(x)
    assert 0.0 <= base <= 200.0
    np.testing.assert_allclose(mad(scaled), base, rtol=1e-9, atol=1e-9)
