"""Binary test matrices, response vectors and the disjunctive/threshold code predicates.

A code of length ``N`` and size ``t`` is stored column-wise: column ``j`` is a
Python ``int`` whose bit ``i`` is the entry in row ``i``.  Elements (columns)
and tests (rows) are numbered from 0.
"""
from __future__ import annotations

import math
import os
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from .exceptions import CodeFormatError, GroupTestingError

__all__ = [
    "BinaryColumn",
    "BinaryCode",
    "response_vector",
    "weight",
    "covers",
    "covered_count",
    "disjunctive_violation",
    "is_disjunctive_code",
    "threshold_violation",
    "is_threshold_code",
    "parse_code",
    "format_code",
    "read_code",
    "write_code",
]


@dataclass(frozen=True)
class BinaryColumn:
    """A binary column of fixed length packed into an integer bit mask."""

    bits: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise GroupTestingError(f"column length must be >= 1, got {self.length}")
        if self.bits < 0 or self.bits >> self.length:
            raise GroupTestingError(
                f"bit mask {self.bits:#x} does not fit in {self.length} bits"
            )

    @classmethod
    def from_bits(cls, values: Sequence[int]) -> "BinaryColumn":
        mask = 0
        for i, b in enumerate(values):
            if b not in (0, 1, True, False):
                raise GroupTestingError(f"entry {b!r} at position {i} is not binary")
            if b:
                mask |= 1 << i
        return cls(mask, len(values))

    @classmethod
    def zeros(cls, length: int) -> "BinaryColumn":
        return cls(0, length)

    @property
    def weight(self) -> int:
        return self.bits.bit_count()

    def to_tuple(self) -> tuple[int, ...]:
        return tuple((self.bits >> i) & 1 for i in range(self.length))

    def __or__(self, other: "BinaryColumn") -> "BinaryColumn":
        _check_lengths(self, other)
        return BinaryColumn(self.bits | other.bits, self.length)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.to_tuple())


class BinaryCode:
    """An ``N x t`` binary test matrix.

    Rows are tests, columns are elements (codewords).  Zero and duplicate
    columns are allowed.

    Parameters
    ----------
    masks : sequence of int
        Column bit masks; bit ``i`` of ``masks[j]`` is ``x_i(j)``.
    length : int
        Number of rows ``N``.
    declared_weight : int, optional
        If given, every column must have exactly this weight.
    """

    __slots__ = ("_masks", "_length", "_declared_weight")

    def __init__(self, masks: Iterable[int], length: int, declared_weight: int | None = None):
        masks = tuple(int(m) for m in masks)
        if length < 1:
            raise GroupTestingError(f"code length N must be >= 1, got {length}")
        if len(masks) < 2:
            raise GroupTestingError(f"code size t must be >= 2, got {len(masks)}")
        for j, m in enumerate(masks):
            if m < 0 or m >> length:
                raise GroupTestingError(f"column {j} does not fit in N={length} bits")
        if declared_weight is not None:
            if not 1 <= declared_weight < length:
                raise GroupTestingError(
                    f"constant weight must satisfy 1 <= w < N, got w={declared_weight}, N={length}"
                )
            bad = [j for j, m in enumerate(masks) if m.bit_count() != declared_weight]
            if bad:
                raise GroupTestingError(
                    f"columns {bad[:5]} do not have the declared weight {declared_weight}"
                )
        self._masks = masks
        self._length = length
        self._declared_weight = declared_weight

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "BinaryCode":
        """Build a code from a row-major 0/1 matrix."""
        arr = np.asarray(rows)
        if arr.ndim != 2:
            raise GroupTestingError("expected a 2-D matrix")
        if not np.isin(arr, (0, 1)).all():
            raise GroupTestingError("matrix entries must be 0 or 1")
        n, t = arr.shape
        masks = [sum(1 << i for i in range(n) if arr[i, j]) for j in range(t)]
        return cls(masks, n)

    @classmethod
    def identity(cls, n: int) -> "BinaryCode":
        return cls([1 << j for j in range(n)], n)

    @property
    def length(self) -> int:
        """Number of tests ``N``."""
        return self._length

    N = length

    @property
    def size(self) -> int:
        """Number of elements ``t``."""
        return len(self._masks)

    t = size

    @property
    def masks(self) -> tuple[int, ...]:
        return self._masks

    @property
    def rate(self) -> float:
        return math.log2(self.size) / self.length

    @property
    def declared_weight(self) -> int | None:
        return self._declared_weight

    def column(self, j: int) -> BinaryColumn:
        return BinaryColumn(self._masks[j], self._length)

    @property
    def columns(self) -> list[BinaryColumn]:
        return [self.column(j) for j in range(self.size)]

    def to_array(self) -> np.ndarray:
        """Row-major ``(N, t)`` uint8 matrix."""
        out = np.zeros((self._length, self.size), dtype=np.uint8)
        for j, m in enumerate(self._masks):
            for i in range(self._length):
                out[i, j] = (m >> i) & 1
        return out

    def __eq__(self, other):
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self._length == other._length and self._masks == other._masks

    def __hash__(self):
        return hash((self._length, self._masks))

    def __repr__(self):
        return f"BinaryCode(N={self.length}, t={self.size})"


def _check_lengths(u: BinaryColumn, v: BinaryColumn) -> None:
    if u.length != v.length:
        raise GroupTestingError(f"column lengths differ: {u.length} != {v.length}")


def _check_subset(code: BinaryCode, members: Iterable[int]) -> list[int]:
    members = list(members)
    t = code.size
    for j in members:
        if not isinstance(j, (int, np.integer)) or not 0 <= j < t:
            raise GroupTestingError(f"defective element {j!r} outside [0, {t})")
    if len(set(members)) != len(members):
        raise GroupTestingError("defective set has repeated members")
    return members


def _check_s(code: BinaryCode, s: int) -> None:
    if not 1 <= s <= code.size - 1:
        raise GroupTestingError(f"s must satisfy 1 <= s <= t-1 = {code.size - 1}, got {s}")


def response_vector(code: BinaryCode, defective: Iterable[int]) -> BinaryColumn:
    """Bitwise OR of the columns indexed by ``defective``; all-zero when empty."""
    mask = 0
    for j in _check_subset(code, defective):
        mask |= code.masks[j]
    return BinaryColumn(mask, code.length)


def weight(v: BinaryColumn) -> int:
    return v.bits.bit_count()


def covers(u: BinaryColumn, v: BinaryColumn) -> bool:
    """True iff ``u | v == u``."""
    _check_lengths(u, v)
    return (u.bits | v.bits) == u.bits


def covered_count(code: BinaryCode, v: BinaryColumn) -> int:
    """Number of codewords of ``code`` covered by ``v``."""
    if v.length != code.length:
        raise GroupTestingError(f"column length {v.length} != code length {code.length}")
    outside = ~v.bits
    return sum(1 for m in code.masks if not m & outside)


def _k_subsets_or(masks: Sequence[int], k: int) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yield ``(subset, OR of its masks)`` for every k-subset, in lexicographic order."""
    t = len(masks)
    idx: list[int] = []

    def rec(start: int, acc: int):
        if len(idx) == k:
            yield tuple(idx), acc
            return
        for j in range(start, t - (k - len(idx)) + 1):
            idx.append(j)
            yield from rec(j + 1, acc | masks[j])
            idx.pop()

    yield from rec(0, 0)


def disjunctive_violation(code: BinaryCode, s: int) -> tuple[tuple[int, ...], int] | None:
    """First ``(S, j)`` with ``|S| = s``, ``j`` not in ``S`` and ``x(S)`` covering ``x(j)``.

    Returns None when the code is a disjunctive s-code.
    """
    _check_s(code, s)
    masks = code.masks
    for subset, v in _k_subsets_or(masks, s):
        outside = ~v
        members = set(subset)
        for j, m in enumerate(masks):
            if j not in members and not m & outside:
                return subset, j
    return None


def is_disjunctive_code(code: BinaryCode, s: int) -> bool:
    return disjunctive_violation(code, s) is None


def _check_T(code: BinaryCode, T: int) -> None:
    if not 1 <= T <= code.length - 1:
        raise GroupTestingError(f"T must satisfy 1 <= T <= N-1 = {code.length - 1}, got {T}")


def threshold_violation(code: BinaryCode, s: int, T: int) -> tuple[tuple[int, ...], int] | None:
    """First subset breaking the threshold condition, with its response weight.

    Only sizes ``s`` (weight must be <= T) and ``s + 1`` (weight must be
    >= T + 1) are inspected; weight is monotone under inclusion, so the
    other sizes follow.
    """
    _check_s(code, s)
    _check_T(code, T)
    for subset, v in _k_subsets_or(code.masks, s):
        if v.bit_count() > T:
            return subset, v.bit_count()
    for subset, v in _k_subsets_or(code.masks, s + 1):
        if v.bit_count() <= T:
            return subset, v.bit_count()
    return None


def is_threshold_code(code: BinaryCode, s: int, T: int) -> bool:
    return threshold_violation(code, s, T) is None


# -- text file format ---------------------------------------------------------


def format_code(code: BinaryCode) -> str:
    lines = [f"{code.length} {code.size}"]
    for i in range(code.length):
        lines.append("".join("1" if (m >> i) & 1 else "0" for m in code.masks))
    return "\n".join(lines) + "\n"


def parse_code(text: str) -> BinaryCode:
    """Parse the ``"N t"`` header followed by ``N`` rows of ``t`` characters."""
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise CodeFormatError("empty code file")
    header = lines[0].split()
    if len(header) != 2 or not all(h.isdigit() for h in header):
        raise CodeFormatError(f"malformed header {lines[0]!r}; expected 'N t'")
    n, t = int(header[0]), int(header[1])
    rows = lines[1:]
    if len(rows) != n:
        raise CodeFormatError(f"header declares {n} rows, found {len(rows)}")
    masks = [0] * t
    for i, row in enumerate(rows):
        row = row.strip()
        if len(row) != t:
            raise CodeFormatError(f"row {i + 1} has {len(row)} characters, expected {t}")
        for j, ch in enumerate(row):
            if ch == "1":
                masks[j] |= 1 << i
            elif ch != "0":
                raise CodeFormatError(f"non-binary character {ch!r} in row {i + 1}")
    try:
        return BinaryCode(masks, n)
    except GroupTestingError as exc:
        raise CodeFormatError(str(exc)) from exc


def read_code(path: str | os.PathLike) -> BinaryCode:
    with open(path, encoding="utf-8") as fh:
        return parse_code(fh.read())


def write_code(code: BinaryCode, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_code(code))
