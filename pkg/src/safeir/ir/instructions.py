"""IR instructions.

One mutable dataclass covers every opcode; which fields are meaningful
depends on the opcode (see the table on Instruction). Equality is structural
and ignores the uid and the source location, so a parsed module compares
equal to the module it was printed from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .checks import CheckSite
from .types import I8, I64, RawPtr, SafePtr, TypeShape


@dataclass(frozen=True)
class SourceLocation:
    """Position of an instruction in a ``.sir`` file (1-based)."""

    file: str
    line: int
    column: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid source location {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"

    def to_dict(self) -> dict:
        return {"file": self.file, "line": self.line, "column": self.column}


class Opcode(Enum):
    ALLOCA = "alloca"
    HEAPALLOC = "heapalloc"
    HEAPFREE = "heapfree"
    LOAD = "load"
    STORE = "store"
    GEP = "gep"
    BITCAST = "bitcast"
    PTRTOINT = "ptrtoint"
    INTTOPTR = "inttoptr"
    CASTSAFE = "castsafe"
    PHI = "phi"
    CALL = "call"
    BINOP = "binop"
    CMP = "cmp"
    CONST = "const"
    GLOBALADDR = "globaladdr"
    BR = "br"
    CONDBR = "condbr"
    RET = "ret"
    CHECK = "check"


TERMINATORS = frozenset({Opcode.BR, Opcode.CONDBR, Opcode.RET})
MEMORY_OPS = frozenset({Opcode.LOAD, Opcode.STORE})
FLOW_DERIVED = frozenset({Opcode.BITCAST, Opcode.GEP, Opcode.PHI})

BINOPS: tuple[str, ...] = ("add", "sub", "mul", "and", "or", "xor")
CMP_PREDICATES: tuple[str, ...] = ("eq", "ne", "lt", "le", "gt", "ge")


@dataclass(eq=True)
class Instruction:
    """A single IR instruction.

    Field usage by opcode:
        ALLOCA      result, shape = allocated object shape
        HEAPALLOC   result, operands = (size,)
        HEAPFREE    operands = (addr,)
        LOAD        result, shape = loaded shape, operands = (addr,)
        STORE       operands = (addr, data)
        GEP         result, shape = result pointer shape, operands = (base,) with
                    static ``offset`` or (base, index) when dynamic
        BITCAST / INTTOPTR / CASTSAFE
                    result, shape = target shape, operands = (value,)
        PTRTOINT    result, operands = (value,)
        PHI         result, shape, incoming = ((block, value), ...)
        CALL        result (optional), shape = result shape, callee = name for
                    direct calls; indirect calls leave callee None and put the
                    function pointer first in operands
        BINOP       result, shape, binop, operands = (lhs, rhs)
        CMP         result, binop = predicate, operands = (lhs, rhs)
        CONST       result, shape, imm
        GLOBALADDR  result, shape, callee = global or function name
        BR          targets = (label,)
        CONDBR      operands = (cond,), targets = (if_true, if_false)
        RET         operands = () or (value,)
        CHECK       operands = (value,), site
    """

    opcode: Opcode
    result: str | None = None
    operands: tuple[str, ...] = ()
    shape: TypeShape | None = None
    offset: int | None = None
    callee: str | None = None
    incoming: tuple[tuple[str, str], ...] = ()
    targets: tuple[str, ...] = ()
    imm: int | None = None
    binop: str | None = None
    site: CheckSite | None = None
    uid: str = field(default="", compare=False)
    loc: SourceLocation | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.operands = tuple(self.operands)
        self.incoming = tuple(tuple(pair) for pair in self.incoming)
        self.targets = tuple(self.targets)

    @property
    def is_terminator(self) -> bool:
        return self.opcode in TERMINATORS

    @property
    def is_check(self) -> bool:
        return self.opcode is Opcode.CHECK

    @property
    def is_memory_access(self) -> bool:
        return self.opcode in MEMORY_OPS

    @property
    def is_indirect_call(self) -> bool:
        return self.opcode is Opcode.CALL and self.callee is None

    @property
    def address(self) -> str | None:
        """Address operand of a load, store or heap free."""
        if self.opcode in (Opcode.LOAD, Opcode.STORE, Opcode.HEAPFREE):
            return self.operands[0]
        return None

    @property
    def call_args(self) -> tuple[str, ...]:
        if self.is_indirect_call:
            return self.operands[1:]
        return self.operands

    def uses(self) -> tuple[str, ...]:
        """Value ids read by this instruction (phi inputs included)."""
        if self.opcode is Opcode.PHI:
            return tuple(value for _, value in self.incoming)
        return self.operands

    def __repr__(self) -> str:
        return f"<Instruction({self.opcode.value} uid='{self.uid}')>"


def value_shape(inst: Instruction) -> TypeShape | None:
    """Shape of the value an instruction defines, None if it defines none."""
    if inst.result is None:
        return None
    if inst.opcode is Opcode.ALLOCA:
        return SafePtr(inst.shape)
    if inst.opcode is Opcode.HEAPALLOC:
        return RawPtr(I8)
    if inst.opcode is Opcode.PTRTOINT:
        return I64
    if inst.opcode is Opcode.CMP:
        return I8
    return inst.shape
