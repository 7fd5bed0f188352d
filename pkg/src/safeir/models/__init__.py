"""SQLAlchemy models for safeir.

This package contains all database models:
- NofreeAnnotation: one persisted nofree verdict per function name
- EvaluationRun: one parity evaluation (modes, pass/fail, FP/FN summary)
- CaseVerdict: the verdict of one corpus case in one mode of a run

Example usage:
    from safeir.models import EvaluationRun
    from safeir.database import get_session

    with get_session(engine) as session:
        latest = session.query(EvaluationRun).order_by(EvaluationRun.id.desc()).first()
"""

from safeir.models.nofree_annotation import NofreeAnnotation
from safeir.models.evaluation_run import EvaluationRun
from safeir.models.case_verdict import CaseVerdict

__all__ = [
    "CaseVerdict",
    "EvaluationRun",
    "NofreeAnnotation",
]
