"""Process-wide cache of eigendecompositions shared by every propagator."""
from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from typing import Callable, Dict, Hashable, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_CAPACITY = 16


class SpectralCache:
    """LRU store of immutable spectral data and evolved vectors, keyed by tuples led by a kind tag."""

    _instance: Optional["SpectralCache"] = None
    _instance_lock = threading.Lock()

    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        self._lock = threading.RLock()
        self._capacity = capacity
        self._entries: "OrderedDict[Hashable, object]" = OrderedDict()
        self._building: Dict[Hashable, threading.Event] = {}
        self.hits = 0
        self.misses = 0

    @classmethod
    def get_instance(cls) -> "SpectralCache":
        with cls._instance_lock:
            if cls._instance is None:
                cls._instance = cls()
            return cls._instance

    def reset(self) -> None:
        with self._lock:
            self._entries.clear()
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def get_or_build(self, key: Hashable, builder: Callable[[], T]) -> T:
        """Return the cached value for ``key``, building it once if absent.

        Concurrent callers asking for the same key wait for the first builder
        instead of repeating the decomposition.
        """

        while True:
            with self._lock:
                if key in self._entries:
                    self._entries.move_to_end(key)
                    self.hits += 1
                    logger.debug("Spectral cache hit for %s", key[:1] if isinstance(key, tuple) else key)
                    return self._entries[key]  # type: ignore[return-value]
                pending = self._building.get(key)
                if pending is None:
                    pending = threading.Event()
                    self._building[key] = pending
                    self.misses += 1
                    owner = True
                else:
                    owner = False
            if owner:
                break
            pending.wait()

        try:
            value = builder()
            with self._lock:
                self._entries[key] = value
                self._entries.move_to_end(key)
                while len(self._entries) > self._capacity:
                    self._entries.popitem(last=False)
            logger.debug("Spectral cache stored %s (%d entries)", key[:1] if isinstance(key, tuple) else key, len(self._entries))
            return value
        finally:
            with self._lock:
                self._building.pop(key, None)
            pending.set()


def get_cache() -> SpectralCache:
    return SpectralCache.get_instance()


__all__ = ["SpectralCache", "get_cache"]
