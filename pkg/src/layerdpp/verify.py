"""Self-check suites run by ``layerdpp verify``.

Squeezing is looked up on the ``dpp`` module at call time so a patched
implementation is what gets checked.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import dpp
from .expressivity import run_expressivity_cases
from .gnn import backward, cross_entropy, forward, init_params
from .graph import Graph
from .training import plain_forward

FULL_DRAWS = 200_000
BASE_TOL = 0.01


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    widened: bool = False

    def line(self) -> str:
        mode = " (widened tolerance mode)" if self.widened else ""
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}{mode}: {self.detail} ({self.seconds:.2f}s)"


def random_psd(S: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    B = rng.standard_normal((rank or S, S))
    return B.T @ B


def random_orthogonal(S: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((S, S)))
    return q * np.sign(np.diag(r))


def subset_probabilities(L: np.ndarray, k: int) -> dict[tuple[int, ...], float]:
    """Brute-force k-DPP law: det(L_Y) over the sum of all size-k minors."""
    dets = {Y: float(np.linalg.det(L[np.ix_(Y, Y)])) for Y in itertools.combinations(range(L.shape[0]), k)}
    z = sum(dets.values())
    return {Y: d / z for Y, d in dets.items()}


def draw_tolerance(draws: int) -> tuple[float, bool]:
    """L-infinity tolerance for ``draws`` samples; widened below the full draw count."""
    if draws >= FULL_DRAWS:
        return BASE_TOL, False
    # about five standard errors of a frequency near 1/2
    return max(BASE_TOL, 5.0 * math.sqrt(0.25 / draws)), True


def suite_kdpp(rng, num_kernels: int = 20, draws: int = FULL_DRAWS) -> SuiteResult:
    tol, widened = draw_tolerance(draws)
    worst = 0.0
    for t in range(num_kernels):
        S = 4 + t % 4
        k = 1 + t % 3
        L = random_psd(S, rng)
        basis = dpp.eig_sym(L)
        out = np.sort(dpp.sample_kdpp(basis, k, rng, size=draws), axis=1)
        codes = (out * (S ** np.arange(k))).sum(axis=1)
        uniq, counts = np.unique(codes, return_counts=True)
        freq = dict(zip(uniq.tolist(), (counts / draws).tolist()))
        for Y, p in subset_probabilities(L, k).items():
            code = int(sum(y * S ** i for i, y in enumerate(Y)))
            worst = max(worst, abs(freq.get(code, 0.0) - p))
    return SuiteResult("k-DPP exactness", worst < tol,
                       f"{num_kernels} kernels x {draws} draws, max |freq - p| = {worst:.4f} (tol {tol:.4f})",
                       widened=widened)


def suite_cauchy_binet(rng, trials: int = 30) -> SuiteResult:
    worst, min_det = 0.0, math.inf
    for _ in range(trials):
        S = int(rng.integers(1, 11))
        L = random_psd(S, rng, rank=int(rng.integers(1, S + 1)))
        lam = dpp.eig_sym(L).eigenvalues
        for k in range(0, min(4, S) + 1):
            dets = [np.linalg.det(L[np.ix_(Y, Y)]) if Y else 1.0 for Y in itertools.combinations(range(S), k)]
            min_det = min(min_det, min(dets))
            brute = float(sum(dets))
            e = dpp.esp(lam, k).total
            scale = max(abs(brute), abs(e), 1e-300)
            # rank-deficient minors leave only rounding noise in both sums
            if scale < 1e-9 * max(1.0, float(np.abs(L).max()) ** k):
                continue
            worst = max(worst, abs(e - brute) / scale)
    ok = worst < 1e-6 and min_det >= -1e-9
    return SuiteResult("Cauchy-Binet / ESP", ok,
                       f"max relative error {worst:.2e}, min det(L_Y) {min_det:.2e}")


def suite_remark1(rng, bases: int = 100, gammas=(0.0, 0.25, 0.5, 0.9, 1.0)) -> SuiteResult:
    worst = 0.0
    for _ in range(bases):
        S = int(rng.integers(2, 9))
        basis = dpp.EigenBasis(np.ones(S), random_orthogonal(S, rng), tuple(range(S)))
        j = int(rng.integers(S))
        before = np.linalg.norm(basis.vectors[j])
        for gamma in gammas:
            after = np.linalg.norm(dpp.squeeze(basis, j, gamma).vectors[j])
            worst = max(worst, abs(after - (1 - gamma) * before))
    return SuiteResult("squeezed row norm", worst < 1e-10,
                       f"{bases} bases x {len(gammas)} gammas, max error {worst:.2e}")


def suite_remark2(rng, bases: int = 100, deltas=(0.01, 0.05), gamma: float = 0.5) -> SuiteResult:
    dup_err, bound_violations, checked = 0.0, 0, 0
    for _ in range(bases):
        S = int(rng.integers(3, 9))
        V = random_orthogonal(S, rng)
        j, i = rng.choice(S, size=2, replace=False)
        Vd = V.copy()
        Vd[i] = Vd[j]
        out = dpp.squeeze(dpp.EigenBasis(np.ones(S), Vd, tuple(range(S))), int(j), gamma).vectors
        dup_err = max(dup_err, abs(np.linalg.norm(out[i]) - (1 - gamma) * np.linalg.norm(Vd[i])))
        for delta in deltas:
            Vs = V.copy()
            Vs[i] = V[j] * (1 + rng.uniform(-delta, delta, size=S))
            out = dpp.squeeze(dpp.EigenBasis(np.ones(S), Vs, tuple(range(S))), int(j), gamma).vectors
            lo = (1 - delta) - gamma * (1 + delta)
            hi = (1 + delta) - gamma * (1 - delta)
            ratio = out[i] / V[j]
            norm_ratio = np.linalg.norm(out[i]) / np.linalg.norm(V[j])
            checked += 1
            if (ratio < lo - 1e-10).any() or (ratio > hi + 1e-10).any():
                bound_violations += 1
            elif not max(lo, 0.0) - 1e-10 <= norm_ratio <= hi + 1e-10:
                bound_violations += 1
    ok = dup_err < 1e-10 and bound_violations == 0
    return SuiteResult("similar rows under squeeze", ok,
                       f"duplicate-row error {dup_err:.2e}, {bound_violations}/{checked} sandwich violations")


def random_fixture(rng, n: int = 10, feats: int = 5, classes: int = 3) -> Graph:
    """Connected random graph: a path plus random chords."""
    edges = {(u, u + 1) for u in range(n - 1)}
    for _ in range(n):
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        edges.add((u, v))
    X = rng.standard_normal((n, feats))
    y = rng.integers(0, classes, size=n)
    y[:classes] = np.arange(classes)
    return Graph.from_edges(n, sorted(edges), X, y, {"train": list(range(n)), "val": [], "test": []})


def random_store(g: Graph, layers: int, rng) -> dpp.SampleStore:
    store = dpp.SampleStore.empty(layers)
    for l in range(layers):
        for i in rng.choice(g.num_nodes, size=3, replace=False):
            far = [j for j in range(g.num_nodes) if j != i and not g.has_edge(int(i), j)]
            if far:
                store.set(l, int(i), rng.choice(far, size=min(2, len(far)), replace=False))
    return store


def gradient_error(g, params, store, eps: float = 1e-6) -> float:
    """Max relative gap between analytic and central-difference gradients."""
    _, cache = forward(params, g, store)
    grads = backward(cache, g.labels, g.train)

    def loss(p):
        return cross_entropy(forward(p, g, store)[0], g.labels, g.train)

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-6)

    worst = 0.0
    for l, W in enumerate(params.weights):
        for idx in np.ndindex(W.shape):
            up, dn = params.copy(), params.copy()
            up.weights[l][idx] += eps
            dn.weights[l][idx] -= eps
            worst = max(worst, rel(grads.weights[l][idx], (loss(up) - loss(dn)) / (2 * eps)))
    up, dn = params.copy(), params.copy()
    up.mu += eps
    dn.mu -= eps
    return max(worst, rel(grads.mu, (loss(up) - loss(dn)) / (2 * eps)))


def suite_gradients(rng, fixtures: int = 20) -> SuiteResult:
    worst = 0.0
    for t in range(fixtures):
        g = random_fixture(rng)
        layers = 2 + t % 2
        params = init_params(g.num_features, 4, g.num_classes, layers, rng, mu=0.5)
        for store in (dpp.SampleStore.empty(layers), random_store(g, layers, rng)):
            worst = max(worst, gradient_error(g, params, store))
    return SuiteResult("gradient check", worst < 1e-4,
                       f"{fixtures} fixtures with and without negatives, max relative error {worst:.2e}")


def suite_reduction(rng, trials: int = 10) -> SuiteResult:
    bad = 0
    for _ in range(trials):
        g = random_fixture(rng)
        params = init_params(g.num_features, 4, g.num_classes, 3, rng, mu=0.0)
        ref, _ = plain_forward(params, g)
        zero_mu, _ = forward(params, g, random_store(g, 3, rng))
        params.mu = 0.7
        no_negs, _ = forward(params, g, dpp.SampleStore.empty(3))
        bad += not (np.array_equal(ref, zero_mu) and np.array_equal(ref, no_negs))
    return SuiteResult("reduction to plain GCN", bad == 0, f"{trials - bad}/{trials} bitwise-equal")


def suite_expressivity() -> SuiteResult:
    checks = run_expressivity_cases()
    failed = [c.id for c in checks if not c.holds]
    detail = f"{len(checks) - len(failed)}/{len(checks)} relations hold"
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return SuiteResult("expressivity cases", not failed, detail)


def run_all(seed: int = 0, draws: int = FULL_DRAWS, fast: bool = False) -> list[SuiteResult]:
    """Every suite, each on its own generator derived from ``seed``."""
    if fast:
        draws = min(draws, 20_000)
    suites = [
        ("kdpp", lambda r: suite_kdpp(r, num_kernels=8 if fast else 20, draws=draws)),
        ("esp", suite_cauchy_binet),
        ("remark1", suite_remark1),
        ("remark2", suite_remark2),
        ("grad", lambda r: suite_gradients(r, fixtures=5 if fast else 20)),
        ("reduce", suite_reduction),
        ("expr", lambda r: suite_expressivity()),
    ]
    results = []
    for i, (_, fn) in enumerate(suites):
        t0 = time.perf_counter()
        res = fn(np.random.default_rng([seed, i]))
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
