"""Ordinal patterns of windows of values or of increments.

A pattern of order ``h`` is the permutation of time indices ``0..h`` that
sorts a window of ``h + 1`` values in descending order, ties broken by
ascending index. Besides scalar encoders this module offers vectorised
window encoders that return integer pattern codes (the lexicographic rank of
the permutation), which the estimators use for long series.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError, UnsupportedOrderError

MAX_ORDER = 6


@dataclass(frozen=True, order=True)
class OrdinalPattern:
    """A permutation of ``{0, ..., h}``.

    Attributes
    ----------
    perm : tuple of int
        Time indices listed from the largest value to the smallest.
    """

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        if len(perm) < 2:
            raise InvalidInputError(f"pattern needs at least two entries, got {perm}")
        if sorted(perm) != list(range(len(perm))):
            raise InvalidInputError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        object.__setattr__(self, "perm", perm)

    @property
    def h(self) -> int:
        """Pattern order (window length minus one)."""
        return len(self.perm) - 1

    @property
    def code(self) -> int:
        """Lexicographic rank of ``perm`` among all patterns of order ``h``."""
        return int(pattern_codes_from_perms(np.asarray([self.perm]))[0])

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.perm)

    @classmethod
    def parse(cls, text: str) -> "OrdinalPattern":
        """Inverse of ``str``: ``"1,0,3,2"`` -> ``OrdinalPattern((1, 0, 3, 2))``."""
        try:
            perm = tuple(int(tok) for tok in text.split(","))
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse pattern {text!r}") from exc
        return cls(perm)


@dataclass(frozen=True)
class PatternHalfSet:
    """Set containing exactly one of ``pi`` and its space reversal for each ``pi``."""

    h: int
    members: frozenset[OrdinalPattern]

    def __contains__(self, item: OrdinalPattern) -> bool:
        return item in self.members

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[OrdinalPattern]:
        return sorted(self.members)


def _check_order(h: int) -> int:
    if isinstance(h, bool) or not isinstance(h, (int, np.integer)):
        raise UnsupportedOrderError(f"pattern order must be an integer, got {h!r}")
    if not 1 <= h <= MAX_ORDER:
        raise UnsupportedOrderError(f"pattern order must satisfy 1 <= h <= {MAX_ORDER}, got {h}")
    return int(h)


def _as_finite_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def encode_pattern(x) -> OrdinalPattern:
    """Ordinal pattern of a window of ``h + 1`` values.

    Parameters
    ----------
    x : array_like
        Finite values, length at least 2.

    Returns
    -------
    OrdinalPattern
        ``perm`` with ``x[perm[0]] >= x[perm[1]] >= ...``; equal values keep
        ascending index order.

    Examples
    --------
    >>> str(encode_pattern([10, 11, 5.5, 8]))
    '1,0,3,2'
    """
    arr = _as_finite_vector(x, "x")
    if arr.size < 2:
        raise InvalidInputError("a window needs at least two values")
    return OrdinalPattern(tuple(np.argsort(-arr, kind="stable").tolist()))


def encode_increments(y) -> OrdinalPattern:
    """Ordinal pattern of the path ``(0, y1, y1 + y2, ...)`` built from increments."""
    arr = _as_finite_vector(y, "y")
    if arr.size < 1:
        raise InvalidInputError("need at least one increment")
    return encode_pattern(np.concatenate(([0.0], np.cumsum(arr))))


def space_reverse(p: OrdinalPattern) -> OrdinalPattern:
    """Reverse the order of the entries: ``(pi_h, ..., pi_0)``."""
    return OrdinalPattern(p.perm[::-1])


def time_reverse(p: OrdinalPattern) -> OrdinalPattern:
    """Map every entry ``pi_i`` to ``h - pi_i``."""
    return OrdinalPattern(tuple(p.h - v for v in p.perm))


@lru_cache(maxsize=None)
def _all_perms(h: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.permutations(range(h + 1)))


def all_patterns(h: int) -> list[OrdinalPattern]:
    """All ``(h + 1)!`` patterns of order ``h`` in lexicographic order."""
    h = _check_order(h)
    return [OrdinalPattern(p) for p in _all_perms(h)]


def canonical_half(h: int) -> PatternHalfSet:
    """Half set keeping the lexicographically smaller of ``pi`` and its reversal."""
    h = _check_order(h)
    members = set()
    for pat in all_patterns(h):
        members.add(min(pat, space_reverse(pat)))
    return PatternHalfSet(h=h, members=frozenset(members))


# ---------------------------------------------------------------------------
# Vectorised encoders


def pattern_codes_from_perms(perms: np.ndarray) -> np.ndarray:
    """Lexicographic ranks (Lehmer codes) of the rows of an integer array."""
    perms = np.asarray(perms)
    m, width = perms.shape
    codes = np.zeros(m, dtype=np.int64)
    for i in range(width - 1):
        smaller_after = np.sum(perms[:, i + 1:] < perms[:, i : i + 1], axis=1)
        codes += smaller_after * math.factorial(width - 1 - i)
    return codes


def window_codes(x, h: int) -> np.ndarray:
    """Pattern codes of all windows ``x[j], ..., x[j + h]`` of a raw series.

    Returns an int64 array of length ``len(x) - h``. Code ``c`` corresponds
    to ``all_patterns(h)[c]``.
    """
    h = _check_order(h)
    arr = _as_finite_vector(x, "x")
    if arr.size < h + 1:
        raise InvalidInputError(f"series of length {arr.size} is too short for order {h}")
    windows = sliding_window_view(arr, h + 1)
    perms = np.argsort(-windows, axis=1, kind="stable")
    return pattern_codes_from_perms(perms)


def increment_window_codes(y, h: int) -> np.ndarray:
    """Pattern codes of all windows of ``h`` consecutive increments.

    Window ``j`` uses ``y[j], ..., y[j + h - 1]`` through the cumulative path
    ``(0, y[j], y[j] + y[j+1], ...)``. Returns ``len(y) - h + 1`` codes.
    """
    h = _check_order(h)
    arr = _as_finite_vector(y, "y")
    if arr.size < h:
        raise InvalidInputError(f"{arr.size} increments are too few for order {h}")
    windows = sliding_window_view(arr, h)
    paths = np.zeros((windows.shape[0], h + 1))
    np.cumsum(windows, axis=1, out=paths[:, 1:])
    perms = np.argsort(-paths, axis=1, kind="stable")
    return pattern_codes_from_perms(perms)


def increment_codes_batch(y: np.ndarray) -> np.ndarray:
    """Pattern codes of increment vectors stored row-wise in ``y`` of shape ``(m, h)``."""
    y = np.asarray(y, dtype=float)
    m, h = y.shape
    paths = np.zeros((m, h + 1))
    np.cumsum(y, axis=1, out=paths[:, 1:])
    return pattern_codes_from_perms(np.argsort(-paths, axis=1, kind="stable"))


def pattern_frequencies(codes: np.ndarray, h: int) -> np.ndarray:
    """Empirical frequency of each pattern code, length ``(h + 1)!``."""
    counts = np.bincount(codes, minlength=math.factorial(h + 1))
    return counts / codes.size
