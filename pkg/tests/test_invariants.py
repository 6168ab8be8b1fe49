import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import numpy as np
import pytest

from core import invariants
from core.invariants import (
    Measurement,
    SkipInvariant,
    Verdict,
    invariant,
    registered_invariants,
    run_invariant_suite,
)
from core.spectral_cache import get_cache

FAST = ["ncpoly.antihomomorphism", "ncpoly.normal_order_oracle", "fock.ccr", "fock.diagonal_shift"]


@pytest.fixture(autouse=True)
def fresh_cache():
    get_cache().reset()
    yield
    get_cache().reset()


def test_registry_covers_every_area():
    names = registered_invariants()
    for prefix in ("ncpoly.", "classical.", "fock.", "evolution.", "correlators."):
        assert any(name.startswith(prefix) for name in names)
    assert len(names) == len(set(names))
    with pytest.raises(ValueError):
        invariant("fock.ccr")(lambda ctx: Measurement(0.0, 0.0))


def test_subset_passes_at_small_sizes():
    ledger = run_invariant_suite(seed=7, sizes=(8, 12), names=FAST)
    assert [result.name for result in ledger.results] == FAST
    assert ledger.passed
    assert all(result.verdict is Verdict.PASS for result in ledger.results)
    assert ledger.sizes == (8, 12)


def test_same_seed_reproduces_residuals():
    first = run_invariant_suite(seed=11, sizes=(8,), names=["ncpoly.antihomomorphism", "ncpoly.shift_reconstruction"])
    second = run_invariant_suite(seed=11, sizes=(8,), names=["ncpoly.shift_reconstruction"])
    assert first.get("ncpoly.shift_reconstruction").max_residual == second.results[0].max_residual


def test_fault_injection_breaks_the_commutator():
    ledger = run_invariant_suite(sizes=(8,), fault_injection=True, names=["fock.ccr"])
    result = ledger.get("fock.ccr")
    assert result.verdict is Verdict.FAIL
    assert result.max_residual > 1e-4
    assert not ledger.passed
    assert ledger.failures == [result]


def test_sizes_below_the_word_length_are_skipped():
    ledger = run_invariant_suite(sizes=(2, 3), names=["fock.ccr", "fock.diagonal_shift"])
    assert ledger.get("fock.ccr").verdict is Verdict.PASS
    skipped = ledger.get("fock.diagonal_shift")
    assert skipped.verdict is Verdict.SKIPPED
    assert "no size reaches" in skipped.detail
    assert ledger.passed


def test_raising_invariant_is_recorded_as_failure(monkeypatch):
    def explode(ctx):
        raise ArithmeticError("diverged")

    def skip(ctx):
        raise SkipInvariant("nothing to do")

    monkeypatch.setitem(invariants._REGISTRY, "test.explode", explode)
    monkeypatch.setitem(invariants._REGISTRY, "test.skip", skip)
    ledger = run_invariant_suite(names=["test.explode", "test.skip"])
    failed = ledger.get("test.explode")
    assert failed.verdict is Verdict.FAIL
    assert math.isinf(failed.max_residual)
    assert "ArithmeticError: diverged" in failed.detail
    assert ledger.get("test.skip").verdict is Verdict.SKIPPED
    assert failed.as_row() == ("test.explode", math.inf, 0.0, "FAIL")


def test_normal_order_oracle_runs_at_its_own_cutoff():
    ledger = run_invariant_suite(seed=3, sizes=(2,), names=["ncpoly.normal_order_oracle"])
    result = ledger.get("ncpoly.normal_order_oracle")
    assert result.verdict is Verdict.PASS
    assert result.max_residual <= 1e-10
    assert invariants.ORACLE_SAMPLES == 50
    assert invariants.ORACLE_CUTOFF == 24


def test_random_symmetric_polys_are_symmetric():
    rng = np.random.default_rng(5)
    for _ in range(10):
        assert invariants.random_symmetric_poly(rng).is_symmetric(1e-12)


def test_unknown_invariant_name():
    with pytest.raises(KeyError):
        run_invariant_suite(names=["fock.nonexistent"])


@pytest.mark.slow
def test_full_suite_passes_with_default_settings():
    ledger = run_invariant_suite()
    assert ledger.failures == []
    assert all(result.verdict is Verdict.PASS for result in ledger.results)
