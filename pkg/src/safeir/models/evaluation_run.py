"""EvaluationRun model - history of parity evaluations.

Each `evaluate --history PATH` appends one row here and one CaseVerdict row
per case and mode.

Design decisions:
- modes is the comma-joined mode list in evaluation order
- summary_json keeps the per-mode FP/FN breakdown exactly as reported, so
  the schema does not change when the report grows
"""

import json
from datetime import datetime, timezone

from sqlalchemy import Boolean, DateTime, Integer, String, Text
from sqlalchemy.orm import Mapped, mapped_column, relationship

from safeir.database import Base


class EvaluationRun(Base):
    """
    One parity evaluation over a corpus.

    The per-case results live in case_verdicts.
    """

    __tablename__ = "evaluation_runs"

    id: Mapped[int] = mapped_column(primary_key=True)

    corpus: Mapped[str] = mapped_column(String(500), nullable=False)
    modes: Mapped[str] = mapped_column(String(100), nullable=False)
    case_count: Mapped[int] = mapped_column(Integer, nullable=False)
    granule: Mapped[int] = mapped_column(Integer, nullable=False)
    passed: Mapped[bool] = mapped_column(Boolean, nullable=False)
    summary_json: Mapped[str] = mapped_column(Text, nullable=False, default="{}")

    started_at: Mapped[datetime] = mapped_column(
        DateTime,
        default=lambda: datetime.now(timezone.utc),
        nullable=False,
        index=True,
    )

    verdicts = relationship(
        "CaseVerdict",
        back_populates="run",
        cascade="all, delete-orphan",
        order_by="CaseVerdict.id",
    )

    @property
    def mode_list(self) -> list[str]:
        return [m for m in self.modes.split(",") if m]

    def __repr__(self) -> str:
        return (
            f"<EvaluationRun(id={self.id}, modes='{self.modes}', "
            f"cases={self.case_count}, passed={self.passed})>"
        )

    def to_dict(self) -> dict:
        """Convert to dictionary for API responses."""
        return {
            "id": self.id,
            "corpus": self.corpus,
            "modes": self.mode_list,
            "case_count": self.case_count,
            "granule": self.granule,
            "passed": self.passed,
            "summary": json.loads(self.summary_json),
            "started_at": self.started_at.isoformat(),
        }
