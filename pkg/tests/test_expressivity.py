from fractions import Fraction as F

import pytest

from layerdpp.expressivity import Affine, crossing, run_expressivity_cases, side


@pytest.fixture(scope="module")
def cases():
    return {c.id: c for c in run_expressivity_cases()}


def test_every_relation_holds(cases):
    assert [c.id for c in cases.values() if not c.holds] == []
    assert len(cases) == 14


@pytest.mark.parametrize("cid, lhs, rhs", [
    ("case1a-max-neg", Affine(F(2), F(2)), Affine(F(2), F(1))),
    ("case1b-mean-neg", Affine(F(3, 2), F(1)), Affine(F(3, 2), F(1, 2))),
    ("case2-prev-layer-max", Affine(F(2), F(2)), Affine(F(2), F(2))),
    ("case2-prev-layer-mean", Affine(F(3, 2), F(1)), Affine(F(3, 2), F(1))),
    ("case2-layer-max", Affine(F(2), F(2)), Affine(F(2), F(1))),
    ("case2-layer-mean", Affine(F(3, 2), F(5, 4)), Affine(F(3, 2), F(1, 2))),
    ("case3-prev-layer-mean-collapse", Affine(F(7, 4), F(7, 4)), Affine(F(3, 2), F(3, 2))),
])
def test_hand_values(cases, cid, lhs, rhs):
    assert cases[cid].lhs == lhs and cases[cid].rhs == rhs


def test_collapse_only_at_one(cases):
    c = cases["case3-prev-layer-mean-collapse"]
    assert crossing(c.lhs, c.rhs) == 1
    assert c.lhs.at(1) == c.rhs.at(1) == 0
    assert c.lhs.at(F(1, 2)) != c.rhs.at(F(1, 2))


def test_next_layer_recovers(cases):
    c = cases["case3-next-layer-mean"]
    assert c.lhs.at(1) == F(1, 2) and c.rhs.at(1) == F(1)


def test_side_without_negatives():
    assert side("mean", [1, 1, 2, 3]) == Affine(F(7, 4))
    assert side("max", [1, 2]) == Affine(F(2))
