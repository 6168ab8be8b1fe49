import sys
import threading
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import pytest

from core.spectral_cache import SpectralCache, get_cache


def test_singleton_and_reset():
    cache = get_cache()
    assert cache is SpectralCache.get_instance()
    cache.reset()
    assert len(cache) == 0
    assert cache.get_or_build("k", lambda: 1) == 1
    assert cache.get_or_build("k", lambda: 2) == 1
    assert (cache.hits, cache.misses) == (1, 1)
    cache.reset()
    assert (len(cache), cache.hits, cache.misses) == (0, 0, 0)


def test_least_recently_used_entry_is_evicted():
    cache = SpectralCache(capacity=2)
    cache.get_or_build("a", lambda: "A")
    cache.get_or_build("b", lambda: "B")
    cache.get_or_build("a", lambda: "A2")
    cache.get_or_build("c", lambda: "C")
    assert len(cache) == 2
    assert cache.get_or_build("a", lambda: "rebuilt") == "A"
    assert cache.get_or_build("b", lambda: "rebuilt") == "rebuilt"


def test_concurrent_callers_share_one_build():
    cache = SpectralCache()
    calls = []

    def build():
        calls.append(1)
        time.sleep(0.05)
        return object()

    results = []
    threads = [threading.Thread(target=lambda: results.append(cache.get_or_build("shared", build))) for _ in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(calls) == 1
    assert all(result is results[0] for result in results)


def test_failed_build_is_not_cached():
    cache = SpectralCache()

    def broken():
        raise RuntimeError("eigh failed")

    with pytest.raises(RuntimeError):
        cache.get_or_build("x", broken)
    assert len(cache) == 0
    assert cache.get_or_build("x", lambda: 5) == 5
