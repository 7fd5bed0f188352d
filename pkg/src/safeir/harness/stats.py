"""Static and dynamic check accounting across modes."""

from __future__ import annotations

import numpy as np

from ..analysis.dealloc_graph import NofreeDb
from ..analysis.type_flow import infer_kinds
from ..constants import INSTRUMENT_MODES, MODE_BASELINE
from ..ir.checks import CheckKind
from ..ir.module import ProgramModule
from ..passes import InstrumentationStats, instrument
from ..runtime import Outcome, RuntimeConfig, execute


def _percentages(stats: InstrumentationStats) -> list[float]:
    return [
        fs.remaining_pct for fs in stats.functions.values() if fs.remaining_pct is not None
    ]


def static_summary(stats: InstrumentationStats) -> dict:
    """Aggregate and per-function static numbers of one mode."""
    total = stats.aggregate.to_dict()
    pcts = _percentages(stats)
    total["function_mean_pct"] = float(np.mean(pcts)) if pcts else None
    total["function_median_pct"] = float(np.median(pcts)) if pcts else None
    total["functions"] = stats.to_dict()
    return total


def dynamic_summary(outcome: Outcome) -> dict:
    return {
        "verdict": outcome.verdict.value,
        "checks": outcome.checks_executed,
        "ensures": outcome.ensures,
        "deref": outcome.counters[CheckKind.DEREF],
        "by_kind": {kind.value: outcome.counters[kind] for kind in CheckKind},
        "instructions_retired": outcome.instructions_retired,
    }


def emit_stats(
    modules: dict[str, InstrumentationStats],
    outcomes: dict[str, Outcome] | None = None,
    kinds: dict[str, dict[str, int]] | None = None,
) -> dict:
    """Build the statistics report.

    Args:
        modules: Instrumentation statistics keyed by mode.
        outcomes: Execution outcomes keyed by mode, if the program was run.
        kinds: Kind histogram of each function of the uninstrumented module.

    Returns:
        ``{"static": {mode: ...}, "dynamic": {mode: ...}, "ratios": {mode: ...},
        "kinds": {function: {kind: count}}}``.
        Ratios are checks executed relative to baseline and are only present
        when baseline ran and executed at least one check.

    Example:
        >>> report = emit_stats({"baseline": stats})
        >>> report["static"]["baseline"]["remaining_pct"]
        100.0
    """
    outcomes = outcomes or {}
    report = {
        "static": {mode: static_summary(stats) for mode, stats in modules.items()},
        "dynamic": {mode: dynamic_summary(outcome) for mode, outcome in outcomes.items()},
        "ratios": {},
        "kinds": kinds or {},
    }
    baseline = outcomes.get(MODE_BASELINE)
    if baseline is not None and baseline.checks_executed > 0:
        for mode, outcome in outcomes.items():
            if mode != MODE_BASELINE:
                report["ratios"][mode] = outcome.checks_executed / baseline.checks_executed
    return report


def format_stats(report: dict) -> str:
    """Human-readable table of a report produced by emit_stats."""
    lines = [f"{'mode':<14}{'baseline':>10}{'elided':>8}{'added':>7}{'remaining':>11}{'pct':>9}"]
    for mode, data in report["static"].items():
        added = sum(data["added"].values())
        pct = data["remaining_pct"]
        pct_text = f"{pct:.1f}%" if pct is not None else "-"
        lines.append(
            f"{mode:<14}{data['baseline']:>10}{data['elided']:>8}{added:>7}"
            f"{data['remaining']:>11}{pct_text:>9}"
        )
    for mode, data in report["dynamic"].items():
        ratio = report["ratios"].get(mode)
        ratio_text = f" ({ratio:.4f} of baseline)" if ratio is not None else ""
        lines.append(f"{mode}: {data['checks']} checks executed, "
                     f"{data['ensures']} ensures{ratio_text}")
    for name, histogram in report.get("kinds", {}).items():
        counts = " ".join(f"{kind}={count}" for kind, count in histogram.items())
        lines.append(f"kinds {name}: {counts}")
    return "\n".join(lines)


def collect_stats(
    m: ProgramModule,
    modes: tuple[str, ...] = INSTRUMENT_MODES,
    db: NofreeDb | None = None,
    entry: str | None = None,
    config: RuntimeConfig | None = None,
) -> dict:
    """Instrument ``m`` in every mode and, if ``entry`` is given, run each result.

    Returns:
        The emit_stats report, with the kind histogram of every defined
        function.
    """
    kinds = {fn.name: infer_kinds(fn, m).histogram() for fn in m.defined_functions()}
    static: dict[str, InstrumentationStats] = {}
    outcomes: dict[str, Outcome] = {}
    for mode in modes:
        instrumented, static[mode] = instrument(m, mode, db)
        if entry is not None:
            outcomes[mode] = execute(instrumented, entry, config)
    return emit_stats(static, outcomes, kinds)
