"""CaseVerdict model - verdict of one corpus case in one mode.

Design decisions:
- One row per (run, case, mode)
- check_kind and location are NULL for clean exits
- outcome flags (false positive / negative, by design) are stored so history
  queries do not need the expected verdict recomputed
"""

from typing import Optional

from sqlalchemy import Boolean, ForeignKey, Index, String, UniqueConstraint
from sqlalchemy.orm import Mapped, mapped_column, relationship

from safeir.database import Base


class CaseVerdict(Base):
    """Result of running one case under one instrumentation mode."""

    __tablename__ = "case_verdicts"

    id: Mapped[int] = mapped_column(primary_key=True)

    run_id: Mapped[int] = mapped_column(
        ForeignKey("evaluation_runs.id", ondelete="CASCADE"),
        nullable=False,
        index=True,
    )

    case_id: Mapped[str] = mapped_column(String(100), nullable=False)
    mode: Mapped[str] = mapped_column(String(20), nullable=False)
    expected: Mapped[str] = mapped_column(String(20), nullable=False)
    verdict: Mapped[str] = mapped_column(String(20), nullable=False)

    check_kind: Mapped[Optional[str]] = mapped_column(String(20), nullable=True)
    location: Mapped[Optional[str]] = mapped_column(String(200), nullable=True)

    false_positive: Mapped[bool] = mapped_column(Boolean, default=False, nullable=False)
    false_negative: Mapped[bool] = mapped_column(Boolean, default=False, nullable=False)
    by_design: Mapped[bool] = mapped_column(Boolean, default=False, nullable=False)

    run = relationship("EvaluationRun", back_populates="verdicts")

    __table_args__ = (
        UniqueConstraint("run_id", "case_id", "mode", name="uq_case_verdict_run_case_mode"),
        Index("ix_case_verdict_case_mode", "case_id", "mode"),
    )

    def __repr__(self) -> str:
        return f"<CaseVerdict(case='{self.case_id}', mode='{self.mode}', verdict={self.verdict})>"

    def to_dict(self) -> dict:
        """Convert to dictionary for API responses."""
        return {
            "case": self.case_id,
            "mode": self.mode,
            "expected": self.expected,
            "verdict": self.verdict,
            "check": self.check_kind,
            "location": self.location,
            "false_positive": self.false_positive,
            "false_negative": self.false_negative,
            "by_design": self.by_design,
        }
