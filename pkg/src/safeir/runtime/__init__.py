"""Tag-based sanitizer runtime and IR interpreter."""

from .interpreter import EngineError, Interpreter, Outcome, RuntimeConfig, Verdict, execute
from .shadow import (
    INTERCEPT,
    Allocation,
    AllocKind,
    ShadowState,
    TaggedAddress,
    Violation,
    ViolationKind,
    check_predicate,
    intercept_free,
)

__all__ = [
    "INTERCEPT",
    "Allocation",
    "AllocKind",
    "EngineError",
    "Interpreter",
    "Outcome",
    "RuntimeConfig",
    "ShadowState",
    "TaggedAddress",
    "Verdict",
    "Violation",
    "ViolationKind",
    "check_predicate",
    "execute",
    "intercept_free",
]
