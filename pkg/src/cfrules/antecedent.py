"""Antecedent expression trees and the summarising models."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Mapping, Union


class UnknownProposition(KeyError):
    """A leaf names a proposition with no belief."""

    def __init__(self, prop: str):
        super().__init__(prop)
        self.prop = prop

    def __str__(self) -> str:
        return f"no belief for proposition {self.prop!r}"


@dataclass(frozen=True)
class Leaf:
    prop: str


@dataclass(frozen=True)
class And:
    children: tuple["Expr", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("And needs at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple["Expr", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("Or needs at least two children")


Expr = Union[Leaf, And, Or]


def leaves(expr: Expr) -> Iterator[str]:
    """Leaf propositions left to right, duplicates included."""
    if isinstance(expr, Leaf):
        yield expr.prop
    else:
        for child in expr.children:
            yield from leaves(child)


class SummarizerKind(str, Enum):
    MAXIMIN = "maximin"
    MIN = "min"
    MAX = "max"
    PRODUCT = "product"
    SUM_MINUS_OVERLAP = "sum_minus_overlap"
    MEAN = "mean"
    MEDIAN = "median"
    PROB_HYBRID = "prob_hybrid"


def _product(xs):
    return math.prod(xs)


def _sum_minus_overlap(xs):
    return 1.0 - math.prod(1.0 - x for x in xs)


_FLAT: dict[SummarizerKind, Callable[[list[float]], float]] = {
    SummarizerKind.MIN: min,
    SummarizerKind.MAX: max,
    SummarizerKind.PRODUCT: _product,
    SummarizerKind.SUM_MINUS_OVERLAP: _sum_minus_overlap,
    SummarizerKind.MEAN: lambda xs: math.fsum(xs) / len(xs),
    SummarizerKind.MEDIAN: statistics.median,
}

# (conjunctive, disjunctive) reducers for the structure-sensitive models
_STRUCTURED = {
    SummarizerKind.MAXIMIN: (min, max),
    SummarizerKind.PROB_HYBRID: (_product, _sum_minus_overlap),
}

Beliefs = Union[Mapping[str, float], Callable[[str], float]]


def _lookup(beliefs: Beliefs, prop: str) -> float:
    if callable(beliefs):
        cf = beliefs(prop)
    else:
        try:
            cf = beliefs[prop]
        except KeyError:
            raise UnknownProposition(prop) from None
    # disconfirmed antecedents weaken a rule but never invert it
    return max(0.0, float(cf))


def summarize(kind: SummarizerKind, expr: Expr, beliefs: Beliefs) -> float:
    """Reduce the antecedent certainties of ``expr`` to one value in [0, 1].

    ``beliefs`` maps proposition names to CFs (a mapping, or a callable that
    raises :class:`UnknownProposition`).  Negative CFs count as 0.  Maximin
    and the probabilistic hybrid follow the And/Or structure; the other
    models see only the flattened list of leaf certainties.
    """
    kind = SummarizerKind(kind)
    if kind in _STRUCTURED:
        conj, disj = _STRUCTURED[kind]

        def walk(node: Expr) -> float:
            if isinstance(node, Leaf):
                return _lookup(beliefs, node.prop)
            vals = [walk(c) for c in node.children]
            return conj(vals) if isinstance(node, And) else disj(vals)

        result = walk(expr)
    else:
        result = _FLAT[kind]([_lookup(beliefs, p) for p in leaves(expr)])
    return min(1.0, max(0.0, result))
