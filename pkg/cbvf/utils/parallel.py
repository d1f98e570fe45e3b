"""Thread-pool helpers for batch rollouts."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "CBVF_THREADS"
DEFAULT_MAX_THREADS = 8


def thread_count(override: Optional[int] = None) -> int:
    """Worker threads to use: ``override``, else ``$CBVF_THREADS``, else min(8, cpu count)."""
    if override is not None:
        return max(1, int(override))
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, raw)
    return max(1, min(DEFAULT_MAX_THREADS, os.cpu_count() or 1))


def parallel_map(
    fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None
) -> list[R]:
    """Apply ``fn`` to every item; results keep the input order."""
    items = list(items)
    workers = min(thread_count(threads), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
