"""Detection parity between instrumentation modes.

Every corpus case is instrumented and executed once per mode. A case whose
expected verdict is VIOLATION but which exits cleanly is a false negative;
the reverse is a false positive.

Design decisions:
- Acceptance: baseline and safeffi-heap (whichever were run) have no FP and
  no FN; safeffi without heap checks may miss free-during-scope cases, which
  are classified as misses by design; earlier reporting holds for every case
  that invalidates the pointer before its cast.
- The safeffi mode used for earlier reporting is safeffi-heap when it ran,
  safeffi otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..constants import MODE_BASELINE, MODE_NONE, MODE_SAFEFFI, MODE_SAFEFFI_HEAP, RUN_MODES
from ..exceptions import SafeIRError
from ..ir.checks import CheckKind
from ..passes import instrument
from ..runtime import Outcome, RuntimeConfig, Verdict, execute
from .corpus import CorpusCase

logger = logging.getLogger(__name__)

STRICT_MODES = (MODE_BASELINE, MODE_SAFEFFI_HEAP)


class ParityError(SafeIRError):
    """Raised for an unknown mode name."""
    pass


@dataclass
class CaseResult:
    """Outcomes of one case in every evaluated mode."""

    case_id: str
    expected: Verdict
    free_during_scope: bool
    invalidation_before_cast: bool
    outcomes: dict[str, Outcome] = field(default_factory=dict)

    def verdict(self, mode: str) -> Verdict:
        return self.outcomes[mode].verdict

    def detected(self, mode: str) -> bool:
        return self.verdict(mode) is Verdict.VIOLATION

    def location(self, mode: str) -> str | None:
        violation = self.outcomes[mode].violation
        if violation is None or violation.location is None:
            return None
        return str(violation.location)

    def to_dict(self) -> dict:
        modes = {}
        for mode, outcome in self.outcomes.items():
            violation = outcome.violation
            modes[mode] = {
                "verdict": outcome.verdict.value,
                "check": violation.check if violation else None,
                "kind": violation.kind.name if violation else None,
                "location": self.location(mode),
            }
        return {
            "id": self.case_id,
            "expected": self.expected.value,
            "free_during_scope": self.free_during_scope,
            "invalidation_before_cast": self.invalidation_before_cast,
            "modes": modes,
        }


@dataclass
class ParityReport:
    modes: list[str] = field(default_factory=list)
    cases: list[CaseResult] = field(default_factory=list)

    # ------------------------------------------------------------------------
    # Per-mode tallies
    # ------------------------------------------------------------------------

    def false_positives(self, mode: str) -> list[str]:
        return [
            c.case_id for c in self.cases
            if c.expected is Verdict.CLEAN_EXIT and c.verdict(mode) is not Verdict.CLEAN_EXIT
        ]

    def false_negatives(self, mode: str) -> list[str]:
        return [
            c.case_id for c in self.cases
            if c.expected is Verdict.VIOLATION and not c.detected(mode)
        ]

    def by_design_misses(self, mode: str) -> list[str]:
        """False negatives explained by missing heap checks."""
        if mode != MODE_SAFEFFI:
            return []
        by_id = {c.case_id: c for c in self.cases}
        return [cid for cid in self.false_negatives(mode) if by_id[cid].free_during_scope]

    def unexplained_misses(self, mode: str) -> list[str]:
        explained = set(self.by_design_misses(mode))
        return [cid for cid in self.false_negatives(mode) if cid not in explained]

    # ------------------------------------------------------------------------
    # Earlier reporting
    # ------------------------------------------------------------------------

    @property
    def early_mode(self) -> str | None:
        for mode in (MODE_SAFEFFI_HEAP, MODE_SAFEFFI):
            if mode in self.modes:
                return mode
        return None

    def reported_earlier(self, case: CaseResult) -> bool:
        """True iff safeffi reports at the cast and baseline at a later dereference."""
        mode = self.early_mode
        if mode is None or MODE_BASELINE not in self.modes:
            return False
        early = case.outcomes[mode].violation
        late = case.outcomes[MODE_BASELINE].violation
        if early is None or late is None or early.location is None or late.location is None:
            return False
        return (
            early.check == CheckKind.CAST.name
            and late.check == CheckKind.DEREF.name
            and early.location.file == late.location.file
            and late.location.line > early.location.line
        )

    def earlier_reports(self) -> list[str]:
        return [c.case_id for c in self.cases if self.reported_earlier(c)]

    def earlier_failures(self) -> list[str]:
        """Cases invalidated before the cast that are not reported earlier."""
        if self.early_mode is None or MODE_BASELINE not in self.modes:
            return []
        return [
            c.case_id for c in self.cases
            if c.invalidation_before_cast and not self.reported_earlier(c)
        ]

    # ------------------------------------------------------------------------
    # Verdict
    # ------------------------------------------------------------------------

    @property
    def passed(self) -> bool:
        for mode in self.modes:
            if mode == MODE_NONE:
                continue
            if self.false_positives(mode):
                return False
            if mode in STRICT_MODES and self.false_negatives(mode):
                return False
            if self.unexplained_misses(mode):
                return False
        return not self.earlier_failures()

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary(self) -> dict:
        return {
            mode: {
                "false_positives": len(self.false_positives(mode)),
                "false_negatives": len(self.false_negatives(mode)),
                "by_design": self.by_design_misses(mode),
                "unexplained": self.unexplained_misses(mode),
            }
            for mode in self.modes
        }

    def to_dict(self) -> dict:
        return {
            "modes": list(self.modes),
            "passed": self.passed,
            "summary": self.summary(),
            "earlier_reporting": {
                "mode": self.early_mode,
                "cases": self.earlier_reports(),
                "failures": self.earlier_failures(),
            },
            "cases": [case.to_dict() for case in self.cases],
        }

    def table(self) -> str:
        """Fixed-width human-readable table, one row per case."""
        width = max([len(c.case_id) for c in self.cases] + [4])
        header = f"{'case':<{width}}  {'expected':<9}" + "".join(f"  {m:<12}" for m in self.modes)
        rows = [header, "-" * len(header)]
        for case in self.cases:
            row = f"{case.case_id:<{width}}  {case.expected.value:<9}"
            for mode in self.modes:
                mark = case.verdict(mode).value
                if case.case_id in self.false_negatives(mode):
                    mark += " FN*" if case.case_id in self.by_design_misses(mode) else " FN"
                elif case.case_id in self.false_positives(mode):
                    mark += " FP"
                row += f"  {mark:<12}"
            rows.append(row)
        for mode, counts in self.summary().items():
            rows.append(
                f"{mode}: FP={counts['false_positives']} FN={counts['false_negatives']} "
                f"(by design: {len(counts['by_design'])})"
            )
        rows.append("PASS" if self.passed else "FAIL")
        return "\n".join(rows)


def run_case(case: CorpusCase, mode: str, config: RuntimeConfig | None = None) -> Outcome:
    """Instrument ``case`` for ``mode`` (unless ``none``) and execute ``main``."""
    if mode not in RUN_MODES:
        raise ParityError(f"unknown mode '{mode}' (expected one of {', '.join(RUN_MODES)})")
    program = case.program
    if mode != MODE_NONE:
        program, _ = instrument(program, mode)
    return execute(program, "main", config)


def evaluate_parity(
    corpus: list[CorpusCase],
    modes: list[str],
    config: RuntimeConfig | None = None,
) -> ParityReport:
    """Run every case in every mode.

    Args:
        corpus: Cases from gen_corpus or load_corpus.
        modes: Mode names; an empty list yields an empty report.
        config: Interpreter configuration shared by all runs.

    Returns:
        The filled ParityReport; ``exit_code`` encodes the acceptance bar.

    Raises:
        ParityError: For an unknown mode.
    """
    report = ParityReport(modes=list(modes))
    if not modes:
        return report
    for mode in modes:
        if mode not in RUN_MODES:
            raise ParityError(f"unknown mode '{mode}' (expected one of {', '.join(RUN_MODES)})")
    for case in corpus:
        result = CaseResult(case.id, case.expected, case.free_during_scope,
                            case.invalidation_before_cast)
        for mode in modes:
            result.outcomes[mode] = run_case(case, mode, config)
        logger.info(
            "%s: %s", case.id,
            ", ".join(f"{m}={o.verdict.value}" for m, o in result.outcomes.items()),
        )
        report.cases.append(result)
    return report
