"""Structural validation of ProgramModules.

validate_module never raises on a bad module; every violated invariant is
reported as a Diagnostic so callers can show all of them at once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import networkx as nx

from .instructions import Instruction, Opcode
from .module import FunctionDef, ProgramModule
from .types import PtrKind, SafePtr, ShapeError, check_shape

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Diagnostic:
    """One violated invariant.

    Attributes:
        function: Function name, empty for module-level problems.
        block: Block label, empty when not tied to a block.
        instruction: uid of the offending instruction, empty when not tied
            to one.
        code: Stable short identifier, e.g. ``unresolved-callee``.
        message: Human-readable explanation.
    """

    function: str
    block: str
    instruction: str
    code: str
    message: str

    def __str__(self) -> str:
        where = "/".join(part for part in (self.function, self.block, self.instruction) if part)
        return f"{where or '<module>'}: [{self.code}] {self.message}"

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "block": self.block,
            "instruction": self.instruction,
            "code": self.code,
            "message": self.message,
        }


def block_graph(fn: FunctionDef) -> nx.DiGraph:
    """Control-flow graph over block labels (edges to unknown labels dropped)."""
    graph = nx.DiGraph()
    labels = {block.label for block in fn.blocks}
    graph.add_nodes_from(labels)
    for block in fn.blocks:
        for target in block.successors():
            if target in labels:
                graph.add_edge(block.label, target)
    return graph


class _FunctionValidator:
    """Collects diagnostics for one function."""

    def __init__(self, module: ProgramModule, fn: FunctionDef):
        self.module = module
        self.fn = fn
        self.diagnostics: list[Diagnostic] = []

    def report(self, code: str, message: str, block: str = "", inst: Instruction | None = None):
        self.diagnostics.append(
            Diagnostic(self.fn.name, block, inst.uid if inst is not None else "", code, message)
        )

    # ------------------------------------------------------------------------

    def run(self) -> list[Diagnostic]:
        self.check_signature()
        if self.fn.is_declaration:
            return self.diagnostics
        if self.fn.is_known_dealloc:
            self.report("dealloc-body", "known deallocators must be declaration-only")

        defs = self.check_definitions()
        self.check_blocks()
        self.check_instructions()
        if not any(d.code in ("ssa-redefinition", "unknown-block") for d in self.diagnostics):
            self.check_dominance(defs)
        if not self.diagnostics:
            self.check_cast_operands()
        return self.diagnostics

    def check_signature(self):
        fn = self.fn
        shapes = [p.shape for p in fn.params]
        if fn.ret_shape is not None:
            shapes.append(fn.ret_shape)
        for shape in shapes:
            try:
                check_shape(shape)
            except ShapeError as e:
                self.report("malformed-shape", str(e))
        if fn.is_foreign:
            for param in fn.params:
                if param.kind is PtrKind.SAFE:
                    self.report(
                        "foreign-safe", f"foreign function takes safe parameter %{param.name}"
                    )
            if fn.ret_kind is PtrKind.SAFE:
                self.report("foreign-safe", "foreign function returns a safe pointer")
        names = [p.name for p in fn.params]
        for name in {n for n in names if names.count(n) > 1}:
            self.report("ssa-redefinition", f"parameter %{name} declared twice")

    def check_definitions(self) -> dict[str, tuple[str, int]]:
        """Map each value id to (block, index) of its definition; params map to ('', -1)."""
        defs: dict[str, tuple[str, int]] = {p.name: ("", -1) for p in self.fn.params}
        for block, index, inst in self.fn.instructions():
            if inst.result is None:
                continue
            if inst.result in defs:
                self.report(
                    "ssa-redefinition", f"%{inst.result} defined more than once", block.label, inst
                )
                continue
            defs[inst.result] = (block.label, index)
        return defs

    def check_blocks(self):
        labels = [block.label for block in self.fn.blocks]
        for label in {lb for lb in labels if labels.count(lb) > 1}:
            self.report("duplicate-block", f"block '{label}' defined more than once", label)
        known = set(labels)
        for block in self.fn.blocks:
            if not block.instructions or not block.instructions[-1].is_terminator:
                self.report("missing-terminator", "block does not end in a terminator", block.label)
            for inst in block.instructions[:-1]:
                if inst.is_terminator:
                    self.report(
                        "misplaced-terminator", "terminator before end of block", block.label, inst
                    )
            term = block.terminator
            if term is not None:
                for target in term.targets:
                    if target not in known:
                        self.report("unknown-block", f"branch to unknown block '{target}'",
                                    block.label, term)

    def check_instructions(self):
        fn, module = self.fn, self.module
        for block, _, inst in fn.instructions():
            op = inst.opcode
            if inst.shape is not None:
                try:
                    check_shape(inst.shape)
                except ShapeError as e:
                    self.report("malformed-shape", str(e), block.label, inst)
                    continue
            if op is Opcode.CALL and inst.callee is not None:
                if not module.resolves(inst.callee):
                    self.report("unresolved-callee", f"call to unknown function @{inst.callee}",
                                block.label, inst)
                else:
                    callee = module.function(inst.callee)
                    if callee is not None and len(callee.params) != len(inst.call_args):
                        self.report(
                            "call-arity",
                            f"@{inst.callee} takes {len(callee.params)} arguments, "
                            f"got {len(inst.call_args)}",
                            block.label, inst,
                        )
                    if callee is not None and callee.ret_shape is None and inst.result:
                        self.report("call-void-result", f"@{inst.callee} returns nothing",
                                    block.label, inst)
            elif op is Opcode.GLOBALADDR:
                if module.address_shape(inst.callee) is None:
                    self.report("unresolved-global", f"unknown symbol @{inst.callee}",
                                block.label, inst)
            elif op is Opcode.GEP:
                if inst.shape is None or not inst.shape.is_pointer:
                    self.report("bad-shape", "gep must produce a pointer", block.label, inst)
            elif op is Opcode.CASTSAFE:
                if fn.is_foreign:
                    self.report("foreign-cast", "foreign code cannot create safe pointers",
                                block.label, inst)
                if not isinstance(inst.shape, SafePtr):
                    self.report("bad-shape", "castsafe must target a safe pointer shape",
                                block.label, inst)
            elif op is Opcode.RET:
                if fn.ret_shape is None and inst.operands:
                    self.report("return-mismatch", "void function returns a value",
                                block.label, inst)
                if fn.ret_shape is not None and not inst.operands:
                    self.report("return-mismatch", "missing return value", block.label, inst)
            elif op is Opcode.CHECK:
                if inst.site is None or inst.site.size < 1:
                    self.report("check-size", "checks must cover at least one byte",
                                block.label, inst)
            elif op is Opcode.PHI:
                preds = {
                    b.label for b in fn.blocks if block.label in b.successors()
                }
                for pred, _ in inst.incoming:
                    if pred not in preds:
                        self.report("phi-predecessor",
                                    f"'{pred}' is not a predecessor of '{block.label}'",
                                    block.label, inst)

    def check_dominance(self, defs: dict[str, tuple[str, int]]):
        fn = self.fn
        graph = block_graph(fn)
        idom = nx.immediate_dominators(graph, fn.entry.label)
        reachable = nx.descendants(graph, fn.entry.label) | {fn.entry.label}

        def dominates(a: str, b: str) -> bool:
            while True:
                if a == b:
                    return True
                parent = idom.get(b)
                if parent is None or parent == b:
                    return False
                b = parent

        def available(value: str, block: str, index: int) -> bool:
            def_block, def_index = defs[value]
            if def_block == "":
                return True
            if def_block == block:
                return def_index < index
            return dominates(def_block, block)

        for block, index, inst in fn.instructions():
            if block.label not in reachable:
                continue  # unreachable
            if inst.opcode is Opcode.PHI:
                for pred, value in inst.incoming:
                    if value not in defs:
                        self.report("undefined-value", f"%{value} is never defined",
                                    block.label, inst)
                    elif pred in reachable and not available(
                            value, pred, len(fn.block(pred).instructions)
                    ):
                        self.report("ssa-dominance",
                                    f"%{value} does not dominate the edge from '{pred}'",
                                    block.label, inst)
                continue
            for value in inst.uses():
                if value not in defs:
                    self.report("undefined-value", f"%{value} is never defined", block.label, inst)
                elif not available(value, block.label, index):
                    self.report("ssa-dominance", f"use of %{value} not dominated by its definition",
                                block.label, inst)

    def check_cast_operands(self):
        from ..analysis.type_flow import TypeFlowError, infer_kinds

        try:
            kinds = infer_kinds(self.fn, self.module)
        except TypeFlowError as e:
            self.report("unclassified-value", str(e))
            return
        for block, _, inst in self.fn.instructions():
            if inst.opcode is Opcode.CASTSAFE and kinds[inst.operands[0]] is not PtrKind.RAW:
                self.report(
                    "cast-operand-not-raw",
                    f"castsafe operand %{inst.operands[0]} is {kinds[inst.operands[0]].name}, "
                    "expected RAW",
                    block.label, inst,
                )


def validate_module(m: ProgramModule) -> list[Diagnostic]:
    """Check every structural invariant of a module.

    Args:
        m: Module to check. Instruction uids must be current (see renumber).

    Returns:
        Diagnostics in discovery order; empty when the module is well-formed.
    """
    diagnostics: list[Diagnostic] = []

    seen: set[str] = set()
    for name in [fn.name for fn in m.functions] + [g.name for g in m.globals]:
        if name in seen:
            diagnostics.append(Diagnostic("", "", "", "duplicate-symbol", f"@{name} defined twice"))
        seen.add(name)
    for glob in m.globals:
        try:
            check_shape(glob.shape)
        except ShapeError as e:
            diagnostics.append(Diagnostic("", "", "", "malformed-shape", f"@{glob.name}: {e}"))

    for fn in m.functions:
        diagnostics.extend(_FunctionValidator(m, fn).run())

    if diagnostics:
        logger.debug("module %s: %d diagnostics", m.name, len(diagnostics))
    return diagnostics
