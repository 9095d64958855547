from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_override: int | None = None


def set_threads(n: int | None) -> None:
    """Pin the worker count for this process (``None`` restores the env default)."""
    global _override
    if n is not None and n < 1:
        raise ValueError("thread count must be positive")
    _override = n


def get_threads() -> int:
    if _override is not None:
        return _override
    raw = os.environ.get("BUNDLES_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T]) -> list[R]:
    """Map ``fn`` over ``items``; results come back in input order regardless of threading."""
    items = list(items)
    threads = min(get_threads(), len(items))
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
