"""Closed-form bounds and known exact values of the genus invariant.

Values are kept symbolic (multiples of pi) and rendered at full double
precision, so golden tests never drift.
"""

import math
from dataclasses import dataclass


def yang_yau(genus):
    """Topological upper bound 8 pi floor((genus + 3) / 2)."""
    if genus < 0:
        raise ValueError("genus must be nonnegative")
    return 8.0 * math.pi * ((genus + 3) // 2)


def lower_bound(genus):
    """Lower bound (3 pi / 4)(genus - 1)."""
    if genus < 0:
        raise ValueError("genus must be nonnegative")
    return 0.75 * math.pi * (genus - 1)


_KNOWN_EXACT = {
    0: (8.0 * math.pi, "Hersch: round sphere"),
    1: (8.0 * math.pi ** 2 / math.sqrt(3.0),
        "Nadirashvili: flat equilateral torus"),
    2: (16.0 * math.pi, "Jakobson-Levitin-Nadirashvili-Nigam-Polterovich "
        "/ Karpukhin: genus-2 family"),
}


def known_exact(genus):
    """Exact supremum with a source tag, where known; None otherwise."""
    return _KNOWN_EXACT.get(genus)


@dataclass(frozen=True)
class BoundsReport:
    genus: int
    yang_yau: float
    lower_bound: float
    known_exact: float | None
    source: str | None


def report(genus):
    exact = known_exact(genus)
    return BoundsReport(
        genus=genus,
        yang_yau=yang_yau(genus),
        lower_bound=lower_bound(genus),
        known_exact=exact[0] if exact else None,
        source=exact[1] if exact else None,
    )
