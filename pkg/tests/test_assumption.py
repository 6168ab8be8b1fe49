import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import pytest

from core.assumption import Verdict, check_assumption1
from core.classical import NonSymmetricHamiltonianError
from core.config import ASSUMPTION_CAVEAT
from core.grammar import parse

CUTOFFS = (20, 40)


def test_number_operator_passes_the_screen():
    report = check_assumption1(parse("a* a"), (0.1, 0.05), CUTOFFS)
    assert report.verdict is Verdict.PASS
    assert report.passed
    assert len(report.records) == 2 * 2 * 2
    assert report.caveat == ASSUMPTION_CAVEAT
    for record in report.records:
        assert record.min_eig == pytest.approx(0.0, abs=1e-12)
        assert record.shift == pytest.approx(1.0)
        assert 0.0 < record.c_beta < 1.0


def test_domination_constant_for_the_number_operator():
    report = check_assumption1(parse("a* a"), (0.1,), CUTOFFS, betas=(1,))
    by_cutoff = {record.cutoff: record.c_beta for record in report.for_hbar(0.1)}
    # largest of ℏn / (ℏn + 1) over the interior block 0..M−2
    assert by_cutoff[20] == pytest.approx(1.8 / 2.8, rel=1e-8)
    assert by_cutoff[40] == pytest.approx(3.8 / 4.8, rel=1e-8)


def test_unbounded_below_hamiltonian_fails():
    report = check_assumption1(parse("(-1) a* a"), (0.1,), CUTOFFS)
    assert report.verdict is Verdict.FAIL
    assert not report.passed
    assert report.records[0].as_row()[-1] == "FAIL"


def test_screen_rejects_bad_input():
    with pytest.raises(NonSymmetricHamiltonianError):
        check_assumption1(parse("a* a + a"), (0.1,), CUTOFFS)
    with pytest.raises(ValueError):
        check_assumption1(parse("a* a"), (0.1,), (20,))


# ---------------------------------------------------------------------------
# Screen at the default cutoffs

HBARS = (0.1, 0.05, 0.025, 0.0125)
QUARTIC = "a*^4 + a^4 - (0.875) (a - a*)(a + a*)^2 (a - a*)"


@pytest.mark.slow
@pytest.mark.parametrize("text", ["a* a + (a* a)^2", QUARTIC])
def test_quartic_hamiltonians_pass_at_default_cutoffs(text):
    report = check_assumption1(parse(text), HBARS)
    assert report.verdict is Verdict.PASS
    assert {record.cutoff for record in report.records} == {200, 400}
    for hbar in HBARS:
        for beta in (1.0, 2.0):
            constants = [record.c_beta for record in report.for_hbar(hbar) if record.beta == beta]
            assert len(constants) == 2
            assert max(constants) <= 2.0 * min(constants)


@pytest.mark.slow
def test_number_conserving_quartic_constants_are_known():
    # max of x / (1 + x + x²) and x² / (1 + x + x²)² over x = ℏn sits at x = 1
    report = check_assumption1(parse("a* a + (a* a)^2"), (0.1,))
    for record in report.records:
        assert record.min_eig == pytest.approx(0.0, abs=1e-9)
        expected = 1.0 / 3.0 if record.beta == 1.0 else 1.0 / 9.0
        assert record.c_beta == pytest.approx(expected, rel=1e-6)


@pytest.mark.slow
def test_negative_number_operator_fails_at_default_cutoffs():
    report = check_assumption1(parse("(-1) a* a"), (0.1,))
    assert report.verdict is Verdict.FAIL
