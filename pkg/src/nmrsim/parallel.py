"""Thread-count resolution and order-preserving parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "NMRSIM_THREADS"

_default: int | None = None


def set_default_threads(n: int | None) -> None:
    global _default
    _default = n


def thread_count(threads: int | None = None) -> int:
    """Explicit value, else the process default, else ``NMRSIM_THREADS``,
    else the machine's CPU count."""
    for value in (threads, _default, os.environ.get(ENV_VAR)):
        if value not in (None, ""):
            n = int(value)
            if n < 1:
                raise ValueError("thread count must be >= 1")
            return n
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``, possibly threaded; result order is fixed."""
    items = list(items)
    n = min(thread_count(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
