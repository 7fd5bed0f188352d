"""Tests for AnnotationStore and open_nofree_db.

Every test gets its own SQLite file in tmp_path; the default database under
the home directory is never touched.
"""

import pytest

from safeir.analysis import NofreeDb, Verdict, load_nofree_db, save_nofree_db
from safeir.constants import MODE_BASELINE, MODE_SAFEFFI
from safeir.database import get_session
from safeir.harness import evaluate_parity
from safeir.models import CaseVerdict
from safeir.utils import AnnotationStore, open_nofree_db


@pytest.fixture
def store(tmp_path):
    return AnnotationStore(tmp_path / "safeir.db")


@pytest.fixture(scope="module")
def small_report(corpus):
    benign = [c for c in corpus if c.expected.value == "clean"][:2]
    during = [c for c in corpus if c.free_during_scope][:1]
    before = [c for c in corpus if c.invalidation_before_cast][:1]
    return evaluate_parity(benign + during + before, [MODE_BASELINE, MODE_SAFEFFI])


def _db(*entries):
    db = NofreeDb()
    for name, verdict, unit in entries:
        db.record(name, verdict, unit)
    return db


# ============================================================================
# Nofree annotations
# ============================================================================

class TestNofreeAnnotations:

    def test_empty_store(self, store):
        assert len(store.load_nofree_db()) == 0
        assert store.get_annotation("f") is None

    def test_replace_and_load(self, store):
        store.replace_nofree_db(_db(("f", Verdict.NOFREE, "a"), ("g", Verdict.MAYFREE, "b")))
        loaded = store.load_nofree_db()
        assert loaded.verdict("f") is Verdict.NOFREE
        assert loaded.verdict("g") is Verdict.MAYFREE
        assert store.get_annotation("g").unit == "b"

    def test_replace_drops_old_rows(self, store):
        store.replace_nofree_db(_db(("f", Verdict.NOFREE, "a")))
        store.replace_nofree_db(_db(("g", Verdict.NOFREE, "b")))
        assert store.get_annotation("f") is None

    def test_merge_never_upgrades(self, store):
        store.replace_nofree_db(_db(("f", Verdict.MAYFREE, "a")))
        merged = store.merge_nofree_db(_db(("f", Verdict.NOFREE, "b"), ("h", Verdict.NOFREE, "b")))
        assert merged.verdict("f") is Verdict.MAYFREE
        assert store.get_annotation("f").verdict == "MAYFREE"
        assert store.get_annotation("h").verdict == "NOFREE"


class TestOpenNofreeDb:

    def test_missing_tsv_is_empty(self, tmp_path):
        assert len(open_nofree_db(tmp_path / "absent.tsv")) == 0

    def test_tsv_round_trip(self, tmp_path):
        path = tmp_path / "nofree.tsv"
        save_nofree_db(_db(("f", Verdict.NOFREE, "a")), path)
        assert open_nofree_db(path).verdict("f") is Verdict.NOFREE

    @pytest.mark.parametrize("suffix", [".db", ".sqlite", ".sqlite3"])
    def test_sqlite_suffix_uses_store(self, tmp_path, suffix):
        path = tmp_path / f"nofree{suffix}"
        save_nofree_db(_db(("f", Verdict.MAYFREE, "a")), path)
        assert AnnotationStore(path).get_annotation("f").verdict == "MAYFREE"
        assert load_nofree_db(path).verdict("f") is Verdict.MAYFREE
        assert open_nofree_db(path).verdict("f") is Verdict.MAYFREE

    def test_missing_sqlite_is_created_empty(self, tmp_path):
        path = tmp_path / "fresh.db"
        assert len(open_nofree_db(path)) == 0
        assert path.exists()


# ============================================================================
# Evaluation history
# ============================================================================

class TestEvaluationHistory:

    def test_record_and_read_back(self, store, small_report):
        run_id = store.record_evaluation(small_report, "<generated>", 16)
        run = store.get_run(run_id)
        assert run.passed is True
        assert run.mode_list == [MODE_BASELINE, MODE_SAFEFFI]
        assert run.case_count == len(small_report.cases)
        verdicts = store.get_case_verdicts(run_id)
        assert len(verdicts) == 2 * len(small_report.cases)
        assert len(store.get_case_verdicts(run_id, MODE_SAFEFFI)) == len(small_report.cases)

    def test_by_design_row(self, store, small_report):
        run_id = store.record_evaluation(small_report, "<generated>", 16)
        rows = [v for v in store.get_case_verdicts(run_id, MODE_SAFEFFI) if v.false_negative]
        assert len(rows) == 1
        assert rows[0].by_design
        assert rows[0].check_kind is None

    def test_violation_row_has_location(self, store, small_report):
        run_id = store.record_evaluation(small_report, "<generated>", 16)
        detected = [v for v in store.get_case_verdicts(run_id, MODE_BASELINE)
                    if v.verdict == "violation"]
        assert detected
        assert all(v.check_kind and v.location for v in detected)

    def test_list_runs_newest_first(self, store, small_report):
        first = store.record_evaluation(small_report, "a", 16)
        second = store.record_evaluation(small_report, "b", 8)
        assert [run.id for run in store.list_runs()] == [second, first]
        assert store.list_runs(limit=1)[0].corpus == "b"

    def test_case_history(self, store, small_report):
        store.record_evaluation(small_report, "a", 16)
        store.record_evaluation(small_report, "a", 16)
        case_id = small_report.cases[0].case_id
        assert store.case_history(case_id, MODE_BASELINE) == ["clean", "clean"]

    def test_regressions(self, store, small_report):
        first = store.record_evaluation(small_report, "a", 16)
        assert store.regressions(first) == []
        second = store.record_evaluation(small_report, "a", 16)
        assert store.regressions(second) == []

        case_id = small_report.cases[0].case_id
        with get_session(store.engine) as session:
            row = (
                session.query(CaseVerdict)
                .filter_by(run_id=second, case_id=case_id, mode=MODE_BASELINE)
                .one()
            )
            row.verdict = "violation"
            row.false_positive = True
        assert store.regressions(second) == [f"{case_id}:{MODE_BASELINE}"]

    def test_unknown_run(self, store):
        assert store.get_run(99) is None
        assert store.get_case_verdicts(99) == []

    def test_describe_run(self, store, small_report):
        run_id = store.record_evaluation(small_report, "<generated>", 16)
        data = store.describe_run(run_id, MODE_SAFEFFI)
        assert data["id"] == run_id
        assert data["passed"] is True
        assert data["regressions"] == []
        assert len(data["cases"]) == len(small_report.cases)
        assert {case["mode"] for case in data["cases"]} == {MODE_SAFEFFI}
        assert store.describe_run(99) is None
