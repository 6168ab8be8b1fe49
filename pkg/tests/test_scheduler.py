import sys
import threading
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import pytest

from core.scheduler import active_sweeps, run_sweep


def test_results_keep_input_order_under_concurrency():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return x * x

    assert run_sweep(range(5), slow_square, concurrency=3) == [0, 1, 4, 9, 16]
    assert run_sweep([2, 3], slow_square) == [4, 9]


def test_concurrent_items_run_on_worker_threads():
    names = []

    def record(_item):
        names.append(threading.current_thread().name)
        return active_sweeps()

    counts = run_sweep(range(4), record, concurrency=2)
    assert all(count >= 1 for count in counts)
    assert all(name.startswith("hbar-sweep") for name in names)
    assert active_sweeps() == 0


def test_first_error_propagates():
    def fail_on_two(x):
        if x == 2:
            raise RuntimeError("boom")
        return x

    with pytest.raises(RuntimeError, match="boom"):
        run_sweep(range(4), fail_on_two, concurrency=2)
    assert active_sweeps() == 0


def test_concurrency_must_be_positive():
    with pytest.raises(ValueError):
        run_sweep([1], lambda x: x, concurrency=0)
    assert run_sweep([], lambda x: x, concurrency=4) == []
