"""Instrumentation passes.

baseline     a DEREF check before every load and store, foreign code
             included.
safeffi      baseline, minus every DEREF check whose address is a safe
             pointer, plus boundary checks where safe pointers come into
             existence: CAST before each castsafe, LOAD after each load of
             a safe pointer, PARAM in the prologue of extern-visible
             functions and RETURN after each call returning a safe pointer.
safeffi-heap safeffi plus HEAP checks before safe dereferences reachable from
             a call that may free.

Design decisions:
- Checks are pseudo-instructions in the IR, so instrumented modules print,
  diff and execute like any other module.
- A castsafe to a zero-sized pointee gets a one-byte liveness check.
- Alignment is not checked.
- Foreign functions keep every DEREF check and get no boundary checks.
- PARAM checks cover every extern-visible function; foreign callers are not
  visible to the analysis.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

from ..analysis.dealloc_graph import (
    NofreeDb,
    access_size,
    build_call_graph,
    compute_nofree,
    insert_heap_checks,
)
from ..analysis.type_flow import KindMap, infer_kinds, is_safe_pointer
from ..constants import INSTRUMENT_MODES, MODE_BASELINE, MODE_SAFEFFI, MODE_SAFEFFI_HEAP
from ..exceptions import SafeIRError
from ..ir.abi import default_decl_kind
from ..ir.checks import AFTER_ORDER, BEFORE_ORDER, CheckKind, CheckSite
from ..ir.instructions import Instruction, Opcode
from ..ir.module import FunctionDef, ProgramModule
from ..ir.types import PtrKind, pointee_of, shape_kind

logger = logging.getLogger(__name__)

ADDED_KINDS: tuple[CheckKind, ...] = (
    CheckKind.CAST,
    CheckKind.LOAD,
    CheckKind.PARAM,
    CheckKind.RETURN,
    CheckKind.HEAP,
)


class InstrumentationError(SafeIRError):
    """Raised for an unknown mode or an already instrumented module."""
    pass


# ============================================================================
# Statistics
# ============================================================================


@dataclass
class FunctionStats:
    """Check accounting for one function."""

    name: str
    baseline: int = 0
    elided: int = 0
    added: dict[CheckKind, int] = field(default_factory=lambda: {k: 0 for k in ADDED_KINDS})

    @property
    def added_total(self) -> int:
        return sum(self.added.values())

    @property
    def remaining(self) -> int:
        return self.baseline - self.elided + self.added_total

    @property
    def remaining_pct(self) -> float | None:
        """Remaining checks as a percentage of baseline; None without baseline checks."""
        if self.baseline == 0:
            return None
        return 100.0 * self.remaining / self.baseline

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "elided": self.elided,
            "added": {kind.value: self.added[kind] for kind in ADDED_KINDS},
            "remaining": self.remaining,
            "remaining_pct": self.remaining_pct,
        }


@dataclass
class InstrumentationStats:
    """Per-function and aggregate accounting of one instrumentation run."""

    mode: str
    functions: dict[str, FunctionStats] = field(default_factory=dict)

    @property
    def aggregate(self) -> FunctionStats:
        total = FunctionStats("<total>")
        for stats in self.functions.values():
            total.baseline += stats.baseline
            total.elided += stats.elided
            for kind in ADDED_KINDS:
                total.added[kind] += stats.added[kind]
        return total

    def to_dict(self) -> dict:
        """``{function: {baseline, elided, added: {...}, remaining_pct}}``."""
        return {name: stats.to_dict() for name, stats in sorted(self.functions.items())}

    def summary(self) -> dict:
        return {"mode": self.mode, "functions": self.to_dict(), "total": self.aggregate.to_dict()}


# ============================================================================
# Site placement
# ============================================================================


def _check_size(shape) -> int:
    pointee = pointee_of(shape) if shape is not None else None
    if pointee is None:
        return 1
    return max(pointee.byte_size, 1)


def deref_sites(fn: FunctionDef) -> list[CheckSite]:
    """One DEREF site per load/store touching at least one byte."""
    shapes = fn.value_shapes()
    sites = []
    for _, _, inst in fn.instructions(include_checks=False):
        if inst.is_memory_access:
            size = access_size(inst, shapes)
            if size > 0:
                sites.append(CheckSite(CheckKind.DEREF, inst.uid, inst.address, size))
    return sites


def place_cast_checks(fn: FunctionDef) -> list[CheckSite]:
    """One CAST site per castsafe, sized by the target pointee."""
    sites = []
    for _, _, inst in fn.instructions(include_checks=False):
        if inst.opcode is Opcode.CASTSAFE and not fn.is_foreign:
            sites.append(
                CheckSite(CheckKind.CAST, inst.uid, inst.operands[0], _check_size(inst.shape))
            )
    return sites


def place_load_checks(fn: FunctionDef) -> list[CheckSite]:
    """One LOAD site after every load whose result is a safe pointer."""
    if fn.is_foreign:
        return []
    sites = []
    for _, _, inst in fn.instructions(include_checks=False):
        if inst.opcode is Opcode.LOAD and shape_kind(inst.shape) is PtrKind.SAFE:
            sites.append(
                CheckSite(CheckKind.LOAD, inst.uid, inst.result, _check_size(inst.shape))
            )
    return sites


def place_param_checks(fn: FunctionDef) -> list[CheckSite]:
    """PARAM sites in the entry block of an extern-visible function, one per safe param."""
    if not fn.is_extern_visible or fn.is_foreign or fn.is_declaration:
        return []
    first = next(inst for inst in fn.entry.instructions if not inst.is_check)
    return [
        CheckSite(CheckKind.PARAM, first.uid, param.name, _check_size(param.shape))
        for param in fn.params
        if param.kind is PtrKind.SAFE
    ]


def place_return_checks(fn: FunctionDef, module: ProgramModule | None = None) -> list[CheckSite]:
    """One RETURN site after each call whose declared return kind is SAFE."""
    if fn.is_foreign:
        return []
    sites = []
    for _, _, inst in fn.instructions(include_checks=False):
        if inst.opcode is Opcode.CALL and inst.result is not None:
            if default_decl_kind(inst, module) is PtrKind.SAFE:
                sites.append(
                    CheckSite(CheckKind.RETURN, inst.uid, inst.result, _check_size(inst.shape))
                )
    return sites


def apply_sites(fn: FunctionDef, sites: list[CheckSite]) -> None:
    """Replace the checks of ``fn`` by ``sites``, positioned around their anchors."""
    before: dict[str, list[CheckSite]] = {}
    after: dict[str, list[CheckSite]] = {}
    for site in sites:
        target = after if site.kind.placed_after_anchor else before
        target.setdefault(site.anchor, []).append(site)

    def ordered(bucket: list[CheckSite], order) -> list[CheckSite]:
        return sorted(bucket, key=lambda s: order.index(s.kind))

    for block in fn.blocks:
        rebuilt: list[Instruction] = []
        for inst in block.instructions:
            if inst.is_check:
                continue
            for site in ordered(before.get(inst.uid, []), BEFORE_ORDER):
                rebuilt.append(_check_instruction(site))
            rebuilt.append(inst)
            for site in ordered(after.get(inst.uid, []), AFTER_ORDER):
                rebuilt.append(_check_instruction(site))
        block.instructions = rebuilt
    fn.renumber()


def _check_instruction(site: CheckSite) -> Instruction:
    return Instruction(Opcode.CHECK, operands=(site.value,), site=site)


# ============================================================================
# Passes
# ============================================================================


def _prepare(m: ProgramModule) -> ProgramModule:
    if m.instrumented:
        raise InstrumentationError(f"module '{m.name}' is already instrumented ({m.instrumented})")
    out = copy.deepcopy(m)
    out.renumber()
    return out


def instrument_baseline(m: ProgramModule) -> tuple[ProgramModule, InstrumentationStats]:
    """Full instrumentation: a DEREF check before every load and store.

    Args:
        m: An uninstrumented, validated module. It is not modified.

    Returns:
        The instrumented copy and its statistics.

    Raises:
        InstrumentationError: If ``m`` is already instrumented.
    """
    out = _prepare(m)
    stats = InstrumentationStats(MODE_BASELINE)
    for fn in out.defined_functions():
        sites = deref_sites(fn)
        apply_sites(fn, sites)
        stats.functions[fn.name] = FunctionStats(fn.name, baseline=len(sites))
    out.instrumented = MODE_BASELINE
    logger.info("baseline: %d checks in %s", stats.aggregate.baseline, m.name)
    return out, stats


def instrument_safeffi(
    m: ProgramModule,
    heap_checks: bool = False,
    db: NofreeDb | None = None,
) -> tuple[ProgramModule, InstrumentationStats]:
    """Elide checks on safe pointers and move them to the cast boundary.

    Args:
        m: An uninstrumented, validated module. It is not modified.
        heap_checks: Also insert HEAP checks for deallocations during a safe
            pointer's scope.
        db: Nofree verdicts of other units; missing externals are MAYFREE.

    Returns:
        The instrumented copy and its statistics.

    Raises:
        InstrumentationError: If ``m`` is already instrumented.
        TypeFlowError: If a function cannot be classified.
    """
    mode = MODE_SAFEFFI_HEAP if heap_checks else MODE_SAFEFFI
    out = _prepare(m)
    stats = InstrumentationStats(mode)

    nofree = None
    if heap_checks:
        nofree = compute_nofree(build_call_graph(out), db or NofreeDb(), with_assumptions=True)

    for fn in out.defined_functions():
        km: KindMap = infer_kinds(fn, out)
        baseline = deref_sites(fn)
        fstats = FunctionStats(fn.name, baseline=len(baseline))

        if fn.is_foreign:
            kept = baseline
        else:
            kept = [site for site in baseline if not is_safe_pointer(km, site.value)]
        fstats.elided = len(baseline) - len(kept)

        added = (
            place_param_checks(fn)
            + place_cast_checks(fn)
            + place_load_checks(fn)
            + place_return_checks(fn, out)
        )
        if nofree is not None:
            added += insert_heap_checks(fn, nofree, km)
        for site in added:
            fstats.added[site.kind] += 1

        apply_sites(fn, kept + added)
        stats.functions[fn.name] = fstats
        logger.debug(
            "%s: baseline=%d elided=%d added=%d",
            fn.name, fstats.baseline, fstats.elided, fstats.added_total,
        )

    out.instrumented = mode
    logger.info("%s: %d of %d checks remain in %s", mode, stats.aggregate.remaining,
                stats.aggregate.baseline, m.name)
    return out, stats


def instrument(
    m: ProgramModule, mode: str, db: NofreeDb | None = None
) -> tuple[ProgramModule, InstrumentationStats]:
    """Dispatch on a mode name (``baseline``, ``safeffi``, ``safeffi-heap``)."""
    if mode == MODE_BASELINE:
        return instrument_baseline(m)
    if mode == MODE_SAFEFFI:
        return instrument_safeffi(m, heap_checks=False, db=db)
    if mode == MODE_SAFEFFI_HEAP:
        return instrument_safeffi(m, heap_checks=True, db=db)
    raise InstrumentationError(
        f"unknown instrumentation mode '{mode}' (expected one of {', '.join(INSTRUMENT_MODES)})"
    )


def unchecked_raw_dereferences(m: ProgramModule) -> list[tuple[str, str]]:
    """(function, uid) of every load/store with neither a DEREF check nor a safe address.

    Empty for any module produced by instrument_safeffi.
    """
    missing = []
    for fn in m.defined_functions():
        km = infer_kinds(fn, m)
        guarded = {
            inst.site.anchor for inst in fn.checks() if inst.site.kind is CheckKind.DEREF
        }
        shapes = fn.value_shapes()
        for _, _, inst in fn.instructions(include_checks=False):
            if not inst.is_memory_access or access_size(inst, shapes) == 0:
                continue
            safe = not fn.is_foreign and is_safe_pointer(km, inst.address)
            if inst.uid not in guarded and not safe:
                missing.append((fn.name, inst.uid))
    return missing
