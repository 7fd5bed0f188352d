"""Pytest fixtures for model tests.

- test_engine: a fresh SQLite database per test
- test_session: a session on it, rolled back afterwards
- sample_run: one EvaluationRun with two CaseVerdict rows
"""

import pytest

from safeir.database import create_db_engine, create_tables, get_session_factory
from safeir.models import CaseVerdict, EvaluationRun


@pytest.fixture(scope="function")
def test_engine(tmp_path):
    """Engine on a temporary database with every table created."""
    engine = create_db_engine(tmp_path / "models.db", echo=False)
    create_tables(engine)

    yield engine

    engine.dispose()


@pytest.fixture(scope="function")
def test_session(test_engine):
    SessionFactory = get_session_factory(test_engine)
    session = SessionFactory()

    yield session

    session.rollback()
    session.close()


@pytest.fixture(scope="function")
def sample_run(test_session):
    run = EvaluationRun(
        corpus="<generated>",
        modes="baseline,safeffi",
        case_count=1,
        granule=16,
        passed=True,
        summary_json='{"baseline": {"false_negatives": 0}}',
    )
    test_session.add(run)
    test_session.flush()
    for mode, verdict in (("baseline", "violation"), ("safeffi", "clean")):
        test_session.add(CaseVerdict(
            run_id=run.id,
            case_id="dealloc-c_heap-c_heap-p1",
            mode=mode,
            expected="violation",
            verdict=verdict,
            check_kind="DEREF" if verdict == "violation" else None,
            location="dealloc-c_heap-c_heap-p1.sir:12:3" if verdict == "violation" else None,
            false_negative=verdict == "clean",
            by_design=verdict == "clean",
        ))
    test_session.commit()
    return run
