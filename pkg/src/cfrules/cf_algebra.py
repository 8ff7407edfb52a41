"""Certainty-factor values, cross-rule combiners and conclusion scalers.

Certainty factors are plain floats in [-1, 1]: -1 is certain-not, 0 is
uncertain, +1 is certain.  :func:`check_cf` is the single gate that enforces
the range.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Iterable, Sequence

TOL = 1e-9


class ContradictionError(ArithmeticError):
    """Two certainties that cannot be reconciled (e.g. +1 against -1)."""


class CombinerKind(str, Enum):
    HECKERMAN = "heckerman"
    CLASSIC = "classic"
    DEMPSTER_SHAFER = "dempster_shafer"
    MEAN = "mean"
    MAX = "max"
    MIN = "min"


class ScalerKind(str, Enum):
    MULTIPLY = "multiply"
    MEAN = "mean"


def check_cf(value: float) -> float:
    """Validate a certainty factor and return it as a float.

    Values within ``TOL`` outside the range are snapped to the bound;
    anything further out raises ``ValueError``.
    """
    v = float(value)
    if math.isnan(v) or v < -1.0 - TOL or v > 1.0 + TOL:
        raise ValueError(f"certainty factor {value!r} outside [-1, 1]")
    return min(1.0, max(-1.0, v))


def cf_close(a: float, b: float, tol: float = TOL) -> bool:
    return abs(a - b) <= tol


def combine_heckerman(x: float, y: float) -> float:
    """Heckerman's modified rule: (x + y) / (1 + xy)."""
    denom = 1.0 + x * y
    if abs(denom) <= 1e-15:
        raise ContradictionError(f"cannot combine {x} with {y}: certain evidence on both sides")
    return check_cf((x + y) / denom)


def combine_classic(x: float, y: float) -> float:
    """MYCIN's three-branch combination."""
    if x >= 0 and y >= 0:
        return check_cf(x + y - x * y)
    if x <= 0 and y <= 0:
        return check_cf(x + y + x * y)
    denom = 1.0 - min(abs(x), abs(y))
    if denom <= 1e-15:
        raise ContradictionError(f"cannot combine {x} with {y}: certain evidence on both sides")
    return check_cf((x + y) / denom)


def _simple_support(cf: float) -> tuple[float, float, float]:
    # (mass on X, mass on not-X, mass on the whole frame)
    if cf >= 0:
        return cf, 0.0, 1.0 - cf
    return 0.0, -cf, 1.0 + cf


def combine_dempster_shafer(x: float, y: float) -> float:
    """Combine two simple support functions by Dempster's rule.

    Each CF becomes a mass assignment over {X, not-X, frame}; the result is
    belief(X) - belief(not-X) after normalising away the conflict.
    """
    a1, n1, t1 = _simple_support(x)
    a2, n2, t2 = _simple_support(y)
    conflict = a1 * n2 + n1 * a2
    if conflict >= 1.0 - 1e-15:
        raise ContradictionError(f"total conflict between {x} and {y}")
    bel_x = a1 * a2 + a1 * t2 + t1 * a2
    bel_not = n1 * n2 + n1 * t2 + t1 * n2
    return check_cf((bel_x - bel_not) / (1.0 - conflict))


def combine_simple(kind: CombinerKind, x: float, y: float) -> float:
    kind = CombinerKind(kind)
    if kind is CombinerKind.MEAN:
        return (x + y) / 2.0
    if kind is CombinerKind.MAX:
        return max(x, y)
    if kind is CombinerKind.MIN:
        return min(x, y)
    raise ValueError(f"{kind.value} is not a simple combiner")


_PAIRWISE = {
    CombinerKind.HECKERMAN: combine_heckerman,
    CombinerKind.CLASSIC: combine_classic,
    CombinerKind.DEMPSTER_SHAFER: combine_dempster_shafer,
}


def combine(kind: CombinerKind, x: float, y: float) -> float:
    """Pairwise combination with any combiner."""
    kind = CombinerKind(kind)
    if kind in _PAIRWISE:
        return _PAIRWISE[kind](x, y)
    return combine_simple(kind, x, y)


def fold_combine(kind: CombinerKind, cfs: Iterable[float]) -> float:
    """Left-fold ``cfs`` in order with the pairwise combiner.

    ``MEAN`` is the arithmetic mean of the whole list rather than an
    iterated pairwise mean, which would overweight late evidence.
    """
    kind = CombinerKind(kind)
    values: Sequence[float] = [check_cf(c) for c in cfs]
    if not values:
        raise ValueError("fold_combine needs at least one certainty factor")
    if kind is CombinerKind.MEAN:
        return check_cf(math.fsum(values) / len(values))
    acc = values[0]
    for v in values[1:]:
        acc = combine(kind, acc, v)
    return acc


def scale(kind: ScalerKind, max_cf: float, antecedent_cf: float) -> float:
    """Attenuate a conclusion's maximum CF by the summarised antecedent CF.

    MULTIPLY returns the product.  MEAN returns the arithmetic mean of the
    (signed) maximum CF and the antecedent certainty.
    """
    kind = ScalerKind(kind)
    if not -TOL <= antecedent_cf <= 1.0 + TOL:
        raise ValueError(f"antecedent certainty {antecedent_cf!r} outside [0, 1]")
    if kind is ScalerKind.MULTIPLY:
        return check_cf(max_cf * antecedent_cf)
    return check_cf((max_cf + antecedent_cf) / 2.0)
