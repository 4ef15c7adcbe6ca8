"""Shared fixtures and brute-force oracles, written independently of the package code."""

import itertools
import math

import numpy as np
import pytest

from layerdpp.graph import Graph


def floyd_warshall(g):
    n = g.num_nodes
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in g.edges():
        d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def kdpp_law(L, k):
    """{subset: det(L_Y) / sum of all size-k principal minors}."""
    dets = {Y: np.linalg.det(L[np.ix_(Y, Y)]) for Y in itertools.combinations(range(len(L)), k)}
    z = sum(dets.values())
    return {Y: d / z for Y, d in dets.items()}


def esp_brute(lam, k):
    return sum(math.prod(c) for c in itertools.combinations(lam, k))


def dense_norm_adj(g):
    A = np.zeros((g.num_nodes, g.num_nodes))
    for u, v in g.edges():
        A[u, v] = A[v, u] = 1
    A += np.eye(g.num_nodes)
    d = A.sum(1)
    return A / np.sqrt(np.outer(d, d))


def path_graph(n, feats=None):
    X = np.eye(n) if feats is None else feats
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], X)


def two_cliques(size, bridges):
    """Two K_size cliques joined by the given (left, right) index pairs."""
    edges = []
    for off in (0, size):
        edges += [(off + a, off + b) for a, b in itertools.combinations(range(size), 2)]
    edges += [(a, size + b) for a, b in bridges]
    n = 2 * size
    X = np.vstack([np.tile([1.0, 0.0], (size, 1)), np.tile([0.0, 1.0], (size, 1))])
    y = np.repeat([0, 1], size)
    return Graph.from_edges(n, edges, X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_graph():
    # 0-1-2-3-4-5 path plus chord 1-4 and a pendant 6 on 5
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4), (5, 6)]
    X = np.random.default_rng(0).standard_normal((7, 3))
    y = np.array([0, 0, 1, 1, 2, 2, 2])
    return Graph.from_edges(7, edges, X, y, {"train": [0, 2, 4], "val": [1, 5], "test": [3, 6]})


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
