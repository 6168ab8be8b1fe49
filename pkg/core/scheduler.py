"""Sweep executor running independent per-ℏ work items."""
from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_active_lock = threading.Lock()
_active_sweeps = 0


def active_sweeps() -> int:
    """Number of sweeps currently running in this process."""

    with _active_lock:
        return _active_sweeps


def _timed(fn: Callable[[T], R], item: T, index: int, total: int) -> R:
    started = time.perf_counter()
    result = fn(item)
    elapsed = (time.perf_counter() - started) * 1000.0
    logger.info("Sweep item %d/%d (%s) finished in %.0f ms", index + 1, total, item, elapsed)
    return result


def run_sweep(items: Sequence[T], fn: Callable[[T], R], concurrency: int = 1) -> List[R]:
    """Apply ``fn`` to every item and return the results in input order.

    With ``concurrency`` above one the items run on a thread pool; numpy and
    scipy release the GIL inside the dense linear algebra that dominates each
    item. The first exception raised by an item propagates to the caller.
    """

    global _active_sweeps
    if concurrency < 1:
        raise ValueError("concurrency must be at least 1")
    items = list(items)
    total = len(items)
    with _active_lock:
        _active_sweeps += 1
    try:
        if concurrency == 1 or total <= 1:
            return [_timed(fn, item, index, total) for index, item in enumerate(items)]
        workers = min(concurrency, total)
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="hbar-sweep") as pool:
            futures = [pool.submit(_timed, fn, item, index, total) for index, item in enumerate(items)]
            return [future.result() for future in futures]
    finally:
        with _active_lock:
            _active_sweeps -= 1


__all__ = ["active_sweeps", "run_sweep"]
