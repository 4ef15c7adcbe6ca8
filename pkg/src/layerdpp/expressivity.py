"""Worked aggregation examples showing when negative samples separate neighbourhoods.

Each side of a comparison is an exact affine function of mu,
``agg(positives) - mu * agg(negatives)``, evaluated with Fractions so that
equalities are checked exactly rather than to a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .gnn import aggregate_max, aggregate_mean

AGGREGATORS = {"max": aggregate_max, "mean": aggregate_mean}


@dataclass(frozen=True)
class Affine:
    """The value ``const - mu * slope``."""

    const: Fraction
    slope: Fraction = Fraction(0)

    def at(self, mu) -> Fraction:
        return self.const - Fraction(mu) * self.slope

    def __str__(self) -> str:
        if self.slope == 0:
            return str(self.const)
        return f"{self.const} - mu*{self.slope}"


def side(agg: str, positives, negatives=()) -> Affine:
    """Aggregate the positive multiset and subtract mu times the aggregated negatives."""
    f = AGGREGATORS[agg]
    pos = f([Fraction(x) for x in positives])
    neg = f([Fraction(x) for x in negatives]) if negatives else Fraction(0)
    return Affine(pos, neg)


def crossing(a: Affine, b: Affine):
    """The mu values where ``a`` and ``b`` agree: 'all', None, or a single Fraction."""
    if a.slope == b.slope:
        return "all" if a.const == b.const else None
    return (a.const - b.const) / (a.slope - b.slope)


@dataclass
class CaseCheck:
    id: str
    relation: str  # "equal", "distinct" (for every mu > 0), "collapse" (equal exactly at mu), "distinct_at"
    lhs: Affine
    rhs: Affine
    mu: Fraction | None
    holds: bool

    def line(self) -> str:
        where = "" if self.mu is None else f" at mu={self.mu}"
        status = "ok" if self.holds else "FAILED"
        return f"{self.id}: {self.lhs} vs {self.rhs} [{self.relation}{where}] {status}"


def _check(id_, relation, lhs, rhs, mu=None) -> CaseCheck:
    x = crossing(lhs, rhs)
    if relation == "equal":
        holds = x == "all"
    elif relation == "distinct":
        # no positive mu makes the two sides agree
        holds = x is None or (x != "all" and x <= 0)
    elif relation == "collapse":
        holds = x != "all" and x is not None and x == Fraction(mu)
    elif relation == "distinct_at":
        holds = lhs.at(mu) != rhs.at(mu)
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return CaseCheck(id_, relation, lhs, rhs, None if mu is None else Fraction(mu), holds)


def run_expressivity_cases() -> list[CaseCheck]:
    """Evaluate every worked example; each entry records whether its relation holds."""
    checks = [
        # one layer, max alone is fooled; negatives split it
        _check("case1a-max-plain", "equal", side("max", [2, 2, 1]), side("max", [2, 1])),
        _check("case1a-max-neg", "distinct",
               side("max", [2, 2, 1], [2, 2, 0]), side("max", [2, 1], [0, 1])),
        # one layer, max and mean both fooled
        _check("case1b-max-plain", "equal", side("max", [1, 1, 2, 2]), side("max", [2, 1])),
        _check("case1b-mean-plain", "equal", side("mean", [1, 1, 2, 2]), side("mean", [1, 2])),
        _check("case1b-max-neg", "distinct",
               side("max", [1, 1, 2, 2], [1, 1, 2, 0]), side("max", [2, 1], [0, 1])),
        _check("case1b-mean-neg", "distinct",
               side("mean", [1, 1, 2, 2], [1, 1, 0, 2]), side("mean", [1, 2], [0, 1])),
        # two layers: the first draw does not help, a different second draw does
        _check("case2-prev-layer-max", "equal",
               side("max", [1, 1, 2, 2], [1, 1, 0, 2]), side("max", [1, 2], [0, 2])),
        _check("case2-prev-layer-mean", "equal",
               side("mean", [1, 1, 2, 2], [1, 1, 0, 2]), side("mean", [1, 2], [0, 2])),
        _check("case2-layer-max", "distinct",
               side("max", [1, 1, 2, 2], [1, 0, 2, 2]), side("max", [1, 2], [1, 0])),
        _check("case2-layer-mean", "distinct",
               side("mean", [1, 1, 2, 2], [1, 0, 2, 2]), side("mean", [1, 2], [1, 0])),
        # negatives can erase a difference, but only for one exact mu
        _check("case3-plain-max", "distinct", side("max", [1, 1, 2, 3]), side("max", [1, 2])),
        _check("case3-plain-mean", "distinct", side("mean", [1, 1, 2, 3]), side("mean", [1, 2])),
        _check("case3-prev-layer-mean-collapse", "collapse",
               side("mean", [1, 1, 2, 3], [1, 3, 0, 3]), side("mean", [1, 2], [0, 3]), mu=1),
    ]
    # the collapsed layer output feeds the next layer, which draws new negatives
    v = side("mean", [1, 1, 2, 3]).const
    v2 = side("mean", [1, 2]).const
    checks.append(_check(
        "case3-next-layer-mean", "distinct_at",
        Affine(v, aggregate_mean([Fraction(x) for x in (1, 0, 2, 2)])),
        Affine(v2, aggregate_mean([Fraction(x) for x in (0, 1)])),
        mu=1,
    ))
    return checks

