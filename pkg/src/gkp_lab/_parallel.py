from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "GKP_LAB_THREADS"


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit value, else ``GKP_LAB_THREADS`` (0 = auto), else 1."""
    if workers is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if workers < 0:
        raise ValueError("worker count must be non-negative")
    if workers == 0:
        return os.cpu_count() or 1
    return workers


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``, optionally on a thread pool; output order follows input order."""
    items = list(items)
    n = resolve_workers(workers)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
