import numpy as np
import pytest

from layerdpp.clustering import (
    Communities,
    candidate_features,
    community_features,
    default_num_communities,
    fluid_communities,
    kmeans,
)
from layerdpp.graph import CandidateSet, Graph

from conftest import path_graph, two_cliques


class TestFluidCommunities:
    def test_two_cliques_split(self):
        g = two_cliques(6, [(0, 0)])
        for seed in range(10):
            c = fluid_communities(g, 2, np.random.default_rng(seed))
            a = c.assignment
            assert len(set(a[:6])) == 1 and len(set(a[6:])) == 1 and a[0] != a[6]

    def test_all_assigned_and_deterministic(self, rng):
        g = path_graph(20)
        c1 = fluid_communities(g, 3, np.random.default_rng(5))
        c2 = fluid_communities(g, 3, np.random.default_rng(5))
        np.testing.assert_array_equal(c1.assignment, c2.assignment)
        assert set(c1.assignment.tolist()) <= {0, 1, 2}
        assert c1.sizes().sum() == 20

    def test_single_community(self, rng):
        c = fluid_communities(path_graph(5), 1, rng)
        assert (c.assignment == 0).all()

    def test_rejects_disconnected(self, rng):
        g = Graph.from_edges(4, [(0, 1), (2, 3)], np.zeros((4, 1)))
        with pytest.raises(ValueError, match="connected"):
            fluid_communities(g, 2, rng)

    def test_rejects_bad_Q(self, rng):
        with pytest.raises(ValueError):
            fluid_communities(path_graph(3), 4, rng)


class TestFeatureMeans:
    def test_community_means(self):
        reps = np.array([[1.0, 0], [3, 0], [0, 2], [0, 4]])
        c = Communities(2, np.array([0, 0, 1, 1]))
        np.testing.assert_allclose(community_features(reps, c), [[2, 0], [0, 3]])

    def test_candidate_mean(self):
        reps = np.arange(10.0).reshape(5, 2)
        s = CandidateSet(0, (2, 4), 6)
        np.testing.assert_allclose(candidate_features(reps, s), [6, 7])

    def test_empty_community_rejected(self):
        with pytest.raises(ValueError):
            community_features(np.zeros((2, 1)), Communities(3, np.array([0, 1])))


class TestKMeans:
    def test_separated_blobs(self, rng):
        centers = np.array([[0, 0], [10, 0], [0, 10]])
        pts = np.vstack([c + 0.1 * rng.standard_normal((30, 2)) for c in centers])
        res = kmeans(pts, 3, rng)
        labels = res.assignment.reshape(3, 30)
        assert all(len(set(row)) == 1 for row in labels)
        assert len({row[0] for row in labels}) == 3

    def test_objective_non_increasing(self, rng):
        pts = rng.standard_normal((200, 3))
        trace = kmeans(pts, 6, rng).objective_trace
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    def test_duplicate_points_no_empty_cluster(self, rng):
        pts = np.vstack([np.zeros((5, 2)), np.ones((5, 2))])
        res = kmeans(pts, 3, rng)
        assert res.assignment.shape == (10,)

    def test_K_equals_n(self, rng):
        pts = rng.standard_normal((5, 2))
        res = kmeans(pts, 5, rng)
        assert sorted(res.assignment.tolist()) == [0, 1, 2, 3, 4]
        assert res.objective == pytest.approx(0.0, abs=1e-12)


def test_default_num_communities():
    g = two_cliques(3, [(0, 0)])
    assert default_num_communities(g) == 2
    assert default_num_communities(path_graph(10)) == 4
