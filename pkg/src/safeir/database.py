"""SQLite persistence for safeir.

Two things are stored: nofree annotations shared between compilation units,
and the history of parity evaluations. Both live in one schema; which file
holds it is up to the caller (``~/.safeir/safeir.db`` when nothing is given).

Design decisions:
- One cached engine per database file, created with all tables on first use.
- Sessions commit on success and roll back on any error, which is re-raised
  as DatabaseError.
- Foreign keys are enforced on every connection (SQLite leaves them off), so
  deleting an EvaluationRun removes its CaseVerdict rows.
"""

import os
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path
from typing import Iterator

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from .constants import (
    DATA_DIR_NAME,
    DEFAULT_HISTORY_DB_NAME,
    DEFAULT_NOFREE_DB_NAME,
    NOFREE_DB_ENV,
)
from .exceptions import SafeIRError

Base = declarative_base()


class DatabaseError(SafeIRError):
    """A session failed; the original SQLAlchemy error is the __cause__."""


# ============================================================================
# Locations
# ============================================================================

def get_data_dir() -> Path:
    """``~/.safeir``, created on demand."""
    data_dir = Path.home() / DATA_DIR_NAME
    data_dir.mkdir(parents=True, exist_ok=True)
    return data_dir


def get_nofree_db_path(override: Path | str | None = None) -> Path:
    """
    Resolve where the nofree database lives.

    Order: explicit override, then $SAFEIR_NOFREE_DB, then ~/.safeir/nofree.tsv.
    Suffixes .db, .sqlite and .sqlite3 select the SQLite store.
    """
    if override:
        return Path(override).expanduser()
    env = os.environ.get(NOFREE_DB_ENV)
    if env:
        return Path(env).expanduser()
    return get_data_dir() / DEFAULT_NOFREE_DB_NAME


# ============================================================================
# Engines and sessions
# ============================================================================

def _enable_foreign_keys(dbapi_conn, _record) -> None:
    cursor = dbapi_conn.cursor()
    cursor.execute("PRAGMA foreign_keys=ON")
    cursor.close()


def create_db_engine(db_path: Path | None = None, echo: bool = False) -> Engine:
    """Open (creating the parent directory of) a SQLite file; no tables are created."""
    path = Path(db_path) if db_path is not None else get_data_dir() / DEFAULT_HISTORY_DB_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(
        f"sqlite:///{path}",
        echo=echo,
        connect_args={"check_same_thread": False},
    )
    event.listen(engine, "connect", _enable_foreign_keys)
    return engine


def create_tables(engine: Engine) -> None:
    # Importing the models registers them with Base.metadata.
    from safeir.models import CaseVerdict, EvaluationRun, NofreeAnnotation  # noqa: F401

    Base.metadata.create_all(engine)


@lru_cache(maxsize=None)
def _cached_engine(path: Path) -> Engine:
    engine = create_db_engine(path)
    create_tables(engine)
    return engine


def get_engine(db_path: Path | str | None = None) -> Engine:
    """
    Shared engine for a database file, with every table created.

    Example:
        engine = get_engine(tmp_path / "history.db")
        with get_session(engine) as session:
            runs = session.query(EvaluationRun).all()
    """
    if db_path is None:
        db_path = get_data_dir() / DEFAULT_HISTORY_DB_NAME
    return _cached_engine(Path(db_path).expanduser().resolve())


def get_session_factory(engine: Engine) -> sessionmaker:
    return sessionmaker(bind=engine, expire_on_commit=False)


@contextmanager
def get_session(engine: Engine | None = None) -> Iterator[Session]:
    """
    Transactional scope around a unit of work.

    Usage:
        with get_session(engine) as session:
            session.add(NofreeAnnotation(function_name="f", verdict="NOFREE"))

    Raises:
        DatabaseError: If anything inside the block fails; the transaction is
            rolled back first.
    """
    session = get_session_factory(engine or get_engine())()
    try:
        yield session
        session.commit()
    except Exception as e:
        session.rollback()
        raise DatabaseError(f"Database operation failed: {e}") from e
    finally:
        session.close()
