"""NofreeAnnotation model - persisted nofree verdicts.

The SQLite counterpart of the TSV nofree database: one row per function
name, holding the verdict and the compilation unit that produced it.

Design decisions:
- function_name is unique; merging goes through NofreeDb.record so the
  never-upgrade rule lives in one place
- verdict is stored as the enum value string ("NOFREE" / "MAYFREE")
"""

from datetime import datetime, timezone

from sqlalchemy import DateTime, String
from sqlalchemy.orm import Mapped, mapped_column

from safeir.database import Base


class NofreeAnnotation(Base):
    """Verdict of one function, as seen by the unit that analysed it."""

    __tablename__ = "nofree_annotations"

    id: Mapped[int] = mapped_column(primary_key=True)

    function_name: Mapped[str] = mapped_column(String(200), nullable=False, unique=True, index=True)
    verdict: Mapped[str] = mapped_column(String(10), nullable=False)

    # Empty for hand-written entries; any unit's verdict replaces those
    unit: Mapped[str] = mapped_column(String(200), nullable=False, default="")

    updated_at: Mapped[datetime] = mapped_column(
        DateTime,
        default=lambda: datetime.now(timezone.utc),
        nullable=False,
    )

    def __repr__(self) -> str:
        return f"<NofreeAnnotation(function='{self.function_name}', verdict={self.verdict})>"

    def to_dict(self) -> dict:
        """Convert to dictionary for API responses."""
        return {
            "function": self.function_name,
            "verdict": self.verdict,
            "unit": self.unit,
            "updated_at": self.updated_at.isoformat(),
        }
