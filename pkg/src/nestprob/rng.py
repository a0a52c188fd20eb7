"""Counter-based random streams and the thread cap.

Streams are keyed by ``(seed, stream_id)`` through Philox, so a Monte Carlo
block always sees the same numbers no matter which worker runs it.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def max_threads() -> int:
    """Parallelism cap from ``NESTPROB_THREADS`` (default 1)."""
    raw = os.environ.get("NESTPROB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"NESTPROB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``list(map(fn, items))``, threaded up to the cap; result order is fixed."""
    items = list(items)
    n = min(max_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
