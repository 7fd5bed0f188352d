"""Functions, globals and compilation units.

Design decisions:
- A FunctionDef without blocks is a declaration. Known deallocators must be
  declarations; the runtime supplies their bodies.
- Instruction uids are positional: a value-defining instruction is known by
  its result id, any other instruction by ``<block>.<k>`` where k counts the
  non-check instructions of the block. Inserting checks therefore never
  renames an existing instruction.
- Check anchors are positional too. Checks that guard a later instruction
  anchor to the next non-check instruction, LOAD and RETURN checks to the
  previous one. renumber() re-derives both after any edit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

from .instructions import Instruction, Opcode, value_shape
from .types import FnPtr, PtrKind, RawPtr, SafePtr, TypeShape


class FnAttr(Enum):
    """Function attributes, in canonical print order."""

    EXTERN_VISIBLE = "extern_visible"
    FOREIGN = "foreign"
    KNOWN_DEALLOC = "known_dealloc"
    NOFREE_DECLARED = "nofree"

    @classmethod
    def from_token(cls, token: str) -> "FnAttr":
        for attr in cls:
            if attr.value == token:
                return attr
        raise ValueError(f"unknown function attribute '{token}'")


@dataclass
class Param:
    name: str
    shape: TypeShape
    kind: PtrKind


@dataclass
class BasicBlock:
    label: str
    instructions: list[Instruction] = field(default_factory=list)

    @property
    def terminator(self) -> Instruction | None:
        if self.instructions and self.instructions[-1].is_terminator:
            return self.instructions[-1]
        return None

    def successors(self) -> tuple[str, ...]:
        term = self.terminator
        return term.targets if term is not None else ()


@dataclass
class FunctionDef:
    name: str
    params: list[Param] = field(default_factory=list)
    ret_shape: TypeShape | None = None
    ret_kind: PtrKind = PtrKind.NONPOINTER
    blocks: list[BasicBlock] = field(default_factory=list)
    attributes: frozenset[FnAttr] = frozenset()

    def __post_init__(self):
        self.attributes = frozenset(self.attributes)

    # ------------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------------

    @property
    def is_declaration(self) -> bool:
        return not self.blocks

    @property
    def is_foreign(self) -> bool:
        return FnAttr.FOREIGN in self.attributes

    @property
    def is_extern_visible(self) -> bool:
        return FnAttr.EXTERN_VISIBLE in self.attributes

    @property
    def is_known_dealloc(self) -> bool:
        return FnAttr.KNOWN_DEALLOC in self.attributes

    @property
    def entry(self) -> BasicBlock:
        return self.blocks[0]

    def block(self, label: str) -> BasicBlock:
        for block in self.blocks:
            if block.label == label:
                return block
        raise KeyError(f"function '{self.name}' has no block '{label}'")

    def instructions(self, include_checks: bool = True):
        """Yield (block, index, instruction) in layout order."""
        for block in self.blocks:
            for index, inst in enumerate(block.instructions):
                if include_checks or not inst.is_check:
                    yield block, index, inst

    def find(self, uid: str) -> Instruction | None:
        for _, _, inst in self.instructions():
            if inst.uid == uid:
                return inst
        return None

    def value_shapes(self) -> dict[str, TypeShape | None]:
        """Shape of every value id defined in the function."""
        shapes: dict[str, TypeShape | None] = {p.name: p.shape for p in self.params}
        for _, _, inst in self.instructions(include_checks=False):
            if inst.result is not None:
                shapes[inst.result] = value_shape(inst)
        return shapes

    def checks(self) -> list[Instruction]:
        return [inst for _, _, inst in self.instructions() if inst.is_check]

    # ------------------------------------------------------------------------
    # Maintenance
    # ------------------------------------------------------------------------

    def renumber(self) -> None:
        """Recompute instruction uids and check anchors from positions."""
        for block in self.blocks:
            ordinal = 0
            previous: Instruction | None = None
            pending: list[Instruction] = []
            for inst in block.instructions:
                if inst.is_check:
                    if inst.site is not None and inst.site.kind.placed_after_anchor:
                        anchor = previous.uid if previous is not None else ""
                        inst.site = dataclasses.replace(inst.site, anchor=anchor)
                    else:
                        pending.append(inst)
                    continue
                inst.uid = inst.result if inst.result is not None else f"{block.label}.{ordinal}"
                ordinal += 1
                for check in pending:
                    check.site = dataclasses.replace(check.site, anchor=inst.uid)
                pending.clear()
                previous = inst
            for check in pending:
                check.site = dataclasses.replace(check.site, anchor="")
        for _, _, inst in self.instructions():
            if inst.is_check and inst.site is not None:
                site = inst.site
                inst.uid = f"{site.kind.value}:{site.anchor}:{site.value}"

    def __repr__(self) -> str:
        return f"<FunctionDef(name='{self.name}', blocks={len(self.blocks)})>"


@dataclass
class GlobalDef:
    """A global object.

    ``kind`` is the kind of the global's address: SAFE for statics of the safe
    language, RAW for objects owned by foreign code.
    """

    name: str
    shape: TypeShape
    kind: PtrKind = PtrKind.SAFE
    init: int = 0

    @property
    def address_shape(self) -> TypeShape:
        if self.kind is PtrKind.RAW:
            return RawPtr(self.shape)
        return SafePtr(self.shape)


@dataclass
class ExternalDecl:
    """A function defined in another compilation unit or in foreign code."""

    name: str
    nofree: bool = False


@dataclass
class ProgramModule:
    name: str
    functions: list[FunctionDef] = field(default_factory=list)
    globals: list[GlobalDef] = field(default_factory=list)
    externals: list[ExternalDecl] = field(default_factory=list)
    instrumented: str | None = None

    def function(self, name: str) -> FunctionDef | None:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None

    def get_global(self, name: str) -> GlobalDef | None:
        for glob in self.globals:
            if glob.name == name:
                return glob
        return None

    def external(self, name: str) -> ExternalDecl | None:
        for ext in self.externals:
            if ext.name == name:
                return ext
        return None

    def resolves(self, callee: str) -> bool:
        return self.function(callee) is not None or self.external(callee) is not None

    def address_shape(self, name: str) -> TypeShape | None:
        """Shape of ``globaladdr @name``, None when the name is unknown."""
        glob = self.get_global(name)
        if glob is not None:
            return glob.address_shape
        if self.function(name) is not None:
            return FnPtr()
        return None

    def defined_functions(self) -> list[FunctionDef]:
        return [fn for fn in self.functions if not fn.is_declaration]

    def renumber(self) -> None:
        for fn in self.functions:
            fn.renumber()

    def instruction_count(self) -> int:
        return sum(
            1 for fn in self.functions for _ in fn.instructions(include_checks=False)
        )

    def __repr__(self) -> str:
        return f"<ProgramModule(name='{self.name}', functions={len(self.functions)})>"
