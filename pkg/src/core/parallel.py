"""
Deterministic parallel map.

Work items are dispatched to a process pool but results are collected in
submission order, so the reduction downstream never depends on scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from src.core.config import get_settings
from src.core.logging import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int | None) -> int:
    """Map ``None``/0 onto the configured default or the core count."""
    if workers is None:
        workers = get_settings().sim_workers
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = 1) -> list[R]:
    """Apply *fn* to every item, in parallel when ``workers > 1``.

    *fn* must be a module-level callable (picklable). The returned list is
    in input order regardless of which worker finished first.
    """
    items = list(items)
    n = min(resolve_workers(workers), len(items)) if items else 1
    if n <= 1:
        return [fn(item) for item in items]
    logger.debug("Dispatching %d work items to %d processes", len(items), n)
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
