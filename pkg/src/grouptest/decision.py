"""The threshold and disjunctive decision rules for s-activity testing."""
from __future__ import annotations

import enum

from .codes import BinaryCode, BinaryColumn, covered_count, weight
from .exceptions import GroupTestingError

__all__ = ["Hypothesis", "threshold_decide", "disjunctive_decide"]


class Hypothesis(enum.Enum):
    #: at most s defective elements
    H0 = "H0"
    #: at least s + 1 defective elements
    H1 = "H1"


def threshold_decide(v: BinaryColumn, T: int) -> Hypothesis:
    """Accept H0 iff the number of positive responses is at most ``T``."""
    if not 1 <= T <= v.length - 1:
        raise GroupTestingError(f"T must satisfy 1 <= T <= N-1 = {v.length - 1}, got {T}")
    return Hypothesis.H0 if weight(v) <= T else Hypothesis.H1


def disjunctive_decide(code: BinaryCode, v: BinaryColumn, s: int) -> Hypothesis:
    """Accept H0 iff ``v`` covers at most ``s`` codewords of ``code``."""
    if not 1 <= s <= code.size - 1:
        raise GroupTestingError(f"s must satisfy 1 <= s <= t-1 = {code.size - 1}, got {s}")
    return Hypothesis.H0 if covered_count(code, v) <= s else Hypothesis.H1
