"""Seed derivation and order-preserving parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .errors import InvalidParameterError

T = TypeVar("T")
R = TypeVar("R")

# Stream identifiers. Each consumer of randomness gets its own branch of the
# seed tree so that adding draws in one place never shifts another.
STREAM_PATH = 1
STREAM_REPLICATION = 2
STREAM_PILOT = 3
STREAM_NORMAL_REFERENCE = 4
STREAM_LIMIT_REFERENCE = 5
STREAM_WEIGHTS = 6
STREAM_ROSENBLATT = 7
STREAM_SRD = 8


def check_seed(seed: int) -> int:
    """Return ``seed`` as a Python int after checking it is non-negative."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidParameterError(f"seed must be a non-negative integer, got {seed!r}")
    if seed < 0:
        raise InvalidParameterError(f"seed must be non-negative, got {seed}")
    return int(seed)


def seed_sequence(seed, *keys: int) -> np.random.SeedSequence:
    """Derive a :class:`numpy.random.SeedSequence` for a stream path.

    Parameters
    ----------
    seed : int or SeedSequence
        Master seed.
    *keys : int
        Stream path appended to the spawn key, e.g. ``(STREAM_REPLICATION, r)``.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in keys)
        )
    return np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(int(k) for k in keys))


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Counter-based generator (Philox) for ``seed`` and stream path ``keys``.

    A ready :class:`numpy.random.Generator` is passed through unchanged when no
    stream keys are given.
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise InvalidParameterError("stream keys cannot be applied to an existing Generator")
        return seed
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count from the argument, then ``OPD_LAB_THREADS``, then 1."""
    if threads is None:
        env = os.environ.get("OPD_LAB_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise InvalidParameterError(f"OPD_LAB_THREADS must be an integer, got {env!r}") from exc
        else:
            threads = 1
    if threads < 1:
        raise InvalidParameterError(f"threads must be >= 1, got {threads}")
    return int(threads)


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply ``func`` to ``items`` and return results in input order.

    With more than one thread the calls run on a pool; since every work item
    carries its own seed, the output does not depend on the worker count.
    """
    items = list(items)
    n_workers = resolve_threads(threads)
    if n_workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(func, items))


def chunk_sizes(total: int, chunk: int) -> Sequence[int]:
    """Split ``total`` into consecutive blocks of at most ``chunk``."""
    full, rest = divmod(int(total), int(chunk))
    return [chunk] * full + ([rest] if rest else [])
