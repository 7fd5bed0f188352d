"""Instrumentation passes (baseline, safeffi, safeffi-heap)."""

from safeir.ir.checks import CheckKind, CheckSite
from safeir.passes.cast_boundary import (
    FunctionStats,
    InstrumentationError,
    InstrumentationStats,
    apply_sites,
    deref_sites,
    instrument,
    instrument_baseline,
    instrument_safeffi,
    place_cast_checks,
    place_load_checks,
    place_param_checks,
    place_return_checks,
    unchecked_raw_dereferences,
)

__all__ = [
    "CheckKind",
    "CheckSite",
    "FunctionStats",
    "InstrumentationError",
    "InstrumentationStats",
    "apply_sites",
    "deref_sites",
    "instrument",
    "instrument_baseline",
    "instrument_safeffi",
    "place_cast_checks",
    "place_load_checks",
    "place_param_checks",
    "place_return_checks",
    "unchecked_raw_dereferences",
]
