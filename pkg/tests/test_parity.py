"""Tests for detection parity over the corpus.

Covers:
- baseline and safeffi-heap detect every violation with no false positives
- safeffi misses exactly the free-during-scope cases, classified by design
- earlier reporting for every case invalidated before its cast
- report rendering, empty mode lists and unknown modes
"""

import pytest

from safeir.constants import MODE_BASELINE, MODE_NONE, MODE_SAFEFFI, MODE_SAFEFFI_HEAP
from safeir.harness import ParityError, evaluate_parity, run_case
from safeir.runtime import Verdict


@pytest.fixture(scope="module")
def report(corpus):
    return evaluate_parity(corpus, [MODE_BASELINE, MODE_SAFEFFI, MODE_SAFEFFI_HEAP])


class TestParity:

    @pytest.mark.parametrize("mode", [MODE_BASELINE, MODE_SAFEFFI_HEAP])
    def test_strict_modes_are_exact(self, report, mode):
        assert report.false_positives(mode) == []
        assert report.false_negatives(mode) == []

    def test_safeffi_misses_only_frees_during_scope(self, report, corpus):
        expected = sorted(case.id for case in corpus if case.free_during_scope)
        assert report.false_positives(MODE_SAFEFFI) == []
        assert sorted(report.false_negatives(MODE_SAFEFFI)) == expected
        assert sorted(report.by_design_misses(MODE_SAFEFFI)) == expected
        assert report.unexplained_misses(MODE_SAFEFFI) == []

    def test_earlier_reporting(self, report, corpus):
        assert report.early_mode == MODE_SAFEFFI_HEAP
        assert report.earlier_failures() == []
        before = {case.id for case in corpus if case.invalidation_before_cast}
        assert before <= set(report.earlier_reports())

    def test_passes_acceptance(self, report):
        assert report.passed
        assert report.exit_code == 0

    def test_summary_and_table(self, report):
        summary = report.summary()
        assert summary[MODE_BASELINE]["false_negatives"] == 0
        assert len(summary[MODE_SAFEFFI]["by_design"]) == 8
        table = report.table()
        assert table.splitlines()[-1] == "PASS"
        assert "FN*" in table

    def test_to_dict(self, report, corpus):
        data = report.to_dict()
        assert data["passed"] is True
        assert len(data["cases"]) == len(corpus)
        assert data["earlier_reporting"]["mode"] == MODE_SAFEFFI_HEAP


class TestParityEdges:

    def test_empty_modes(self, corpus):
        report = evaluate_parity(corpus, [])
        assert report.cases == []
        assert report.passed

    def test_unknown_mode(self, corpus):
        with pytest.raises(ParityError):
            evaluate_parity(corpus, ["fast"])
        with pytest.raises(ParityError):
            run_case(corpus[0], "fast")

    def test_uninstrumented_never_false_positive(self, corpus):
        report = evaluate_parity(corpus, [MODE_NONE])
        assert report.false_positives(MODE_NONE) == []

    def test_safeffi_alone_still_reports_earlier(self, corpus):
        subset = [case for case in corpus if case.invalidation_before_cast][:4]
        report = evaluate_parity(subset, [MODE_BASELINE, MODE_SAFEFFI])
        assert report.early_mode == MODE_SAFEFFI
        assert report.earlier_reports() == [case.id for case in subset]

    def test_by_design_miss_does_not_fail(self, corpus):
        during = [case for case in corpus if case.free_during_scope][:1]
        report = evaluate_parity(during, [MODE_SAFEFFI])
        assert report.cases[0].verdict(MODE_SAFEFFI) is Verdict.CLEAN_EXIT
        assert report.passed

    def test_uninstrumented_mode_is_not_judged(self, corpus):
        during = [case for case in corpus if case.free_during_scope][:1]
        report = evaluate_parity(during, [MODE_NONE, MODE_BASELINE])
        assert report.false_negatives(MODE_NONE) == [during[0].id]
        assert report.passed
