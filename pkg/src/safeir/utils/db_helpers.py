"""Database helper functions for the CLI and server.py

Provides high-level operations on the SQLite annotation store: the nofree
database and the evaluation history.
"""

import json
import logging
from pathlib import Path
from typing import Optional

from ..analysis.dealloc_graph import NofreeDb, Verdict, load_nofree_db
from ..constants import SQLITE_SUFFIXES
from ..database import get_engine, get_session
from ..harness.parity import ParityReport
from ..models import CaseVerdict, EvaluationRun, NofreeAnnotation

logger = logging.getLogger(__name__)


class AnnotationStore:
    """Nofree annotations and evaluation history in one SQLite file."""

    def __init__(self, db_path: Path | str | None = None):
        """Initialize the store.

        Args:
            db_path: Optional path to a SQLite database file. The file and
                     its tables are created if missing. When omitted, uses
                     ~/.safeir/safeir.db.
        """
        self.engine = get_engine(db_path)

    # ========================================================================
    # Nofree annotations
    # ========================================================================

    def load_nofree_db(self) -> NofreeDb:
        """Read every annotation into a NofreeDb."""
        db = NofreeDb()
        with get_session(self.engine) as session:
            for row in session.query(NofreeAnnotation).order_by(NofreeAnnotation.function_name):
                db.record(row.function_name, Verdict(row.verdict), row.unit)
        return db

    def replace_nofree_db(self, db: NofreeDb) -> None:
        """Make the stored annotations exactly ``db``."""
        with get_session(self.engine) as session:
            session.query(NofreeAnnotation).delete()
            for name, entry in db.items():
                session.add(NofreeAnnotation(
                    function_name=name,
                    verdict=entry.verdict.value,
                    unit=entry.unit,
                ))
        logger.info("stored %d nofree annotations", len(db))

    def merge_nofree_db(self, db: NofreeDb) -> NofreeDb:
        """Merge ``db`` into the stored annotations (MAYFREE wins) and return the result."""
        merged = self.load_nofree_db().merge(db)
        self.replace_nofree_db(merged)
        return merged

    def get_annotation(self, function_name: str) -> Optional[NofreeAnnotation]:
        with get_session(self.engine) as session:
            return session.query(NofreeAnnotation).filter_by(function_name=function_name).first()

    # ========================================================================
    # Evaluation history
    # ========================================================================

    def record_evaluation(self, report: ParityReport, corpus: str, granule: int) -> int:
        """
        Append a parity run and its per-case verdicts.

        Args:
            report: The evaluated report.
            corpus: Corpus directory (or "<generated>" for an in-memory corpus).
            granule: Granule size the runs used.

        Returns:
            ID of the new EvaluationRun row.
        """
        with get_session(self.engine) as session:
            run = EvaluationRun(
                corpus=corpus,
                modes=",".join(report.modes),
                case_count=len(report.cases),
                granule=granule,
                passed=report.passed,
                summary_json=json.dumps(report.summary(), sort_keys=True),
            )
            session.add(run)
            session.flush()

            for mode in report.modes:
                fps = set(report.false_positives(mode))
                fns = set(report.false_negatives(mode))
                by_design = set(report.by_design_misses(mode))
                for case in report.cases:
                    violation = case.outcomes[mode].violation
                    session.add(CaseVerdict(
                        run_id=run.id,
                        case_id=case.case_id,
                        mode=mode,
                        expected=case.expected.value,
                        verdict=case.verdict(mode).value,
                        check_kind=violation.check if violation is not None else None,
                        location=case.location(mode),
                        false_positive=case.case_id in fps,
                        false_negative=case.case_id in fns,
                        by_design=case.case_id in by_design,
                    ))
            run_id = run.id
        logger.info("recorded evaluation run %d (%d cases)", run_id, len(report.cases))
        return run_id

    def list_runs(self, limit: int = 20) -> list[EvaluationRun]:
        """Most recent runs first."""
        with get_session(self.engine) as session:
            return (
                session.query(EvaluationRun)
                .order_by(EvaluationRun.id.desc())
                .limit(limit)
                .all()
            )

    def get_run(self, run_id: int) -> Optional[EvaluationRun]:
        with get_session(self.engine) as session:
            return session.query(EvaluationRun).filter_by(id=run_id).first()

    def get_case_verdicts(self, run_id: int, mode: str | None = None) -> list[CaseVerdict]:
        with get_session(self.engine) as session:
            query = session.query(CaseVerdict).filter_by(run_id=run_id)
            if mode is not None:
                query = query.filter_by(mode=mode)
            return query.order_by(CaseVerdict.id).all()

    def case_history(self, case_id: str, mode: str) -> list[str]:
        """Verdicts of one case in one mode across all runs, oldest first."""
        with get_session(self.engine) as session:
            rows = (
                session.query(CaseVerdict)
                .filter_by(case_id=case_id, mode=mode)
                .order_by(CaseVerdict.run_id)
                .all()
            )
            return [row.verdict for row in rows]

    def regressions(self, run_id: int) -> list[str]:
        """Cases that were clean-vs-expected in the previous run but not in ``run_id``."""
        with get_session(self.engine) as session:
            previous = (
                session.query(EvaluationRun)
                .filter(EvaluationRun.id < run_id)
                .order_by(EvaluationRun.id.desc())
                .first()
            )
            if previous is None:
                return []
            prior = {
                (v.case_id, v.mode): v
                for v in session.query(CaseVerdict).filter_by(run_id=previous.id)
            }
            found = []
            for v in session.query(CaseVerdict).filter_by(run_id=run_id).order_by(CaseVerdict.id):
                before = prior.get((v.case_id, v.mode))
                if before is None:
                    continue
                if _acceptable(before) and not _acceptable(v):
                    found.append(f"{v.case_id}:{v.mode}")
            return found

    def describe_run(self, run_id: int, mode: str | None = None) -> Optional[dict]:
        """A run's to_dict() plus its case verdicts and regressions; None if unknown."""
        run = self.get_run(run_id)
        if run is None:
            return None
        data = run.to_dict()
        data["regressions"] = self.regressions(run_id)
        data["cases"] = [v.to_dict() for v in self.get_case_verdicts(run_id, mode)]
        return data


def _acceptable(row: CaseVerdict) -> bool:
    return not row.false_positive and (not row.false_negative or row.by_design)


def open_nofree_db(path: Path | str) -> NofreeDb:
    """Load the nofree database at ``path``; a missing TSV file is an empty DB."""
    path = Path(path)
    if path.suffix not in SQLITE_SUFFIXES and not path.exists():
        logger.debug("no nofree db at %s, starting empty", path)
        return NofreeDb()
    return load_nofree_db(path)
