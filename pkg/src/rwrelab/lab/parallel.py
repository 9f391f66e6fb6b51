"""Deterministic task-parallel helper.

Tasks carry their own RNG keys, so results do not depend on scheduling; the
map preserves input order, making every downstream reduction independent of
the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Apply fn to items, in order, optionally on a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def split_indices(n: int, chunks: int) -> list[range]:
    """Split range(n) into at most `chunks` contiguous, deterministic parts."""
    chunks = max(1, min(chunks, n)) if n else 1
    bounds = [round(i * n / chunks) for i in range(chunks + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(chunks) if bounds[i] < bounds[i + 1]]
