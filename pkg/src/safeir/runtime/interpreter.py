"""Small-step interpreter for (instrumented) ProgramModules.

Values are 64-bit integers; pointers carry their allocation tag in the top
byte. Memory is a sparse byte map over a synthetic address space with four
regions: code (function addresses), globals, heap and stack.

Design decisions:
- The heap is a bump allocator that never reuses addresses, so a dangling
  heap pointer always meets retagged memory.
- Every alloca is its own tagged allocation. Returning from a function
  releases and retags the frame's allocations and resets the stack pointer.
- Foreign functions execute exactly like safe ones; whole-program
  instrumentation is assumed, so tags flow through foreign code too.
- Loads and stores never fault by themselves; only check instructions and
  the free interceptor report violations.
- Comparisons are unsigned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from ..constants import (
    ALLOCATOR_NAMES,
    DEALLOCATOR_NAMES,
    DEFAULT_CODE_BASE,
    DEFAULT_GLOBAL_BASE,
    DEFAULT_GRANULE,
    DEFAULT_HEAP_BASE,
    DEFAULT_MAX_STEPS,
    DEFAULT_STACK_BASE,
    WORD_MASK,
    WORD_SIZE,
)
from ..exceptions import SafeIRError
from ..ir.checks import CheckKind
from ..ir.instructions import Instruction, Opcode
from ..ir.module import BasicBlock, FunctionDef, ProgramModule
from ..ir.types import TypeShape
from .shadow import (
    INTERCEPT,
    Allocation,
    AllocKind,
    ShadowState,
    TaggedAddress,
    Violation,
    check_predicate,
    intercept_free,
)

logger = logging.getLogger(__name__)

_CODE_STRIDE = 16


class EngineError(SafeIRError):
    """Raised when a module cannot be interpreted (a malformed program, not a violation)."""
    pass


class Verdict(Enum):
    CLEAN_EXIT = "clean"
    VIOLATION = "violation"
    TIMEOUT = "timeout"


@dataclass
class RuntimeConfig:
    """Interpreter configuration; every field has a deterministic default."""

    granule: int = DEFAULT_GRANULE
    heap_base: int = DEFAULT_HEAP_BASE
    stack_base: int = DEFAULT_STACK_BASE
    global_base: int = DEFAULT_GLOBAL_BASE
    code_base: int = DEFAULT_CODE_BASE
    max_steps: int = DEFAULT_MAX_STEPS


@dataclass
class Outcome:
    """Result of one execution."""

    verdict: Verdict
    exit_code: int | None = None
    violation: Violation | None = None
    counters: dict[CheckKind, int] = field(default_factory=lambda: {k: 0 for k in CheckKind})
    ensures: int = 0
    instructions_retired: int = 0

    @property
    def checks_executed(self) -> int:
        return sum(self.counters.values())

    def to_dict(self) -> dict:
        data = {
            "verdict": self.verdict.value,
            "exit_code": self.exit_code,
            "counters": {
                **{kind.value: self.counters[kind] for kind in CheckKind},
                "ensures": self.ensures,
                "checks": self.checks_executed,
                "instructions_retired": self.instructions_retired,
            },
        }
        if self.violation is not None:
            data["violation"] = self.violation.to_dict()
        return data


# ============================================================================
# Machine state
# ============================================================================


class Memory:
    """Sparse little-endian byte memory; unwritten bytes read as 0."""

    def __init__(self):
        self.bytes: dict[int, int] = {}

    def read(self, address: int, size: int) -> int:
        value = 0
        for i in range(size):
            value |= self.bytes.get(address + i, 0) << (8 * i)
        return value

    def write(self, address: int, size: int, value: int) -> None:
        for i in range(size):
            self.bytes[address + i] = (value >> (8 * i)) & 0xFF


@dataclass
class Frame:
    fn: FunctionDef
    block: BasicBlock
    index: int = 0
    values: dict[str, int] = field(default_factory=dict)
    allocas: list[Allocation] = field(default_factory=list)
    saved_sp: int = 0
    result: str | None = None


class _Halt(Exception):
    """Unwinds the step loop once a violation is reported."""

    def __init__(self, violation: Violation):
        self.violation = violation


def _mask(value: int, shape: TypeShape | None) -> int:
    size = shape.byte_size if shape is not None else WORD_SIZE
    if size <= 0:
        return 0
    return value & ((1 << (8 * size)) - 1)


class Interpreter:
    """Executes one module; create a new instance per run."""

    def __init__(self, m: ProgramModule, config: RuntimeConfig | None = None):
        self.module = m
        self.config = config or RuntimeConfig()
        self.shadow = ShadowState(self.config.granule)
        self.memory = Memory()
        self.heap_top = self.config.heap_base
        self.sp = self.config.stack_base
        self.outcome = Outcome(Verdict.CLEAN_EXIT)
        self.globals: dict[str, int] = {}
        self.code: dict[int, FunctionDef] = {}
        self.code_addr: dict[str, int] = {}
        self.anchors: dict[str, dict[str, Instruction]] = {}
        self.shapes: dict[str, dict[str, TypeShape | None]] = {}
        self.stack: list[Frame] = []
        self._layout()

    # ------------------------------------------------------------------------
    # Setup
    # ------------------------------------------------------------------------

    def _layout(self):
        for i, fn in enumerate(self.module.functions):
            address = self.config.code_base + _CODE_STRIDE * i
            self.code[address] = fn
            self.code_addr[fn.name] = address
        cursor = self.config.global_base
        for glob in self.module.globals:
            size = glob.shape.byte_size
            alloc = self.shadow.allocate(cursor, size, AllocKind.GLOBAL)
            self.memory.write(cursor, min(size, WORD_SIZE), glob.init & WORD_MASK)
            self.globals[glob.name] = TaggedAddress.make(cursor, alloc.tag).value
            cursor += self.shadow.padded(size)

    def _anchor(self, fn: FunctionDef, uid: str) -> Instruction | None:
        table = self.anchors.get(fn.name)
        if table is None:
            table = {inst.uid: inst for _, _, inst in fn.instructions()}
            self.anchors[fn.name] = table
        return table.get(uid)

    def _shapes(self, fn: FunctionDef) -> dict[str, TypeShape | None]:
        shapes = self.shapes.get(fn.name)
        if shapes is None:
            shapes = self.shapes[fn.name] = fn.value_shapes()
        return shapes

    # ------------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------------

    def value(self, frame: Frame, name: str) -> int:
        try:
            return frame.values[name]
        except KeyError:
            raise EngineError(f"%{name} read before definition in '{frame.fn.name}'") from None

    def allocate(self, size: int, kind: AllocKind) -> tuple[int, Allocation]:
        if kind is AllocKind.HEAP:
            base = self.heap_top
            self.heap_top += self.shadow.padded(size)
        else:
            base = self.sp
            self.sp += self.shadow.padded(size)
        alloc = self.shadow.allocate(base, size, kind)
        return TaggedAddress.make(base, alloc.tag).value, alloc

    def report(self, violation: Violation, frame: Frame, inst: Instruction):
        violation.function = frame.fn.name
        if inst.is_check:
            anchor = self._anchor(frame.fn, inst.site.anchor)
            violation.check = inst.site.kind.name
            violation.instruction = inst.site.anchor
            violation.location = anchor.loc if anchor is not None and anchor.loc else inst.loc
        else:
            violation.check = violation.check or INTERCEPT
            violation.instruction = inst.uid
            violation.location = inst.loc
        logger.info("violation: %s", violation)
        raise _Halt(violation)

    def enter(self, frame: Frame, label: str, pred: str | None):
        try:
            block = frame.fn.block(label)
        except KeyError as e:
            raise EngineError(str(e)) from None
        incoming = {}
        index = 0
        while index < len(block.instructions) and block.instructions[index].opcode is Opcode.PHI:
            phi = block.instructions[index]
            sources = dict(phi.incoming)
            if pred not in sources:
                raise EngineError(f"phi %{phi.result} has no input from '{pred}'")
            incoming[phi.result] = self.value(frame, sources[pred])
            index += 1
        frame.values.update(incoming)
        self.outcome.instructions_retired += index
        frame.block = block
        frame.index = index

    # ------------------------------------------------------------------------
    # Calls
    # ------------------------------------------------------------------------

    def call(self, frame: Frame, inst: Instruction):
        args = [self.value(frame, a) for a in inst.call_args]
        if inst.is_indirect_call:
            target = self.value(frame, inst.operands[0])
            callee = self.code.get(target & WORD_MASK)
            if callee is None:
                raise EngineError(f"indirect call to 0x{target:x}, which is not a function")
            name = callee.name
        else:
            name = inst.callee
            callee = self.module.function(name)

        if callee is not None and not callee.is_declaration:
            if len(args) != len(callee.params):
                raise EngineError(f"@{name} takes {len(callee.params)} arguments, got {len(args)}")
            callee_frame = Frame(
                callee,
                callee.entry,
                values={p.name: a for p, a in zip(callee.params, args)},
                saved_sp=self.sp,
                result=inst.result,
            )
            self.stack.append(callee_frame)
            self.enter(callee_frame, callee.entry.label, None)
            return

        result = self.runtime_call(name, callee, args, frame, inst)
        if inst.result is not None:
            frame.values[inst.result] = result
        frame.index += 1

    def runtime_call(self, name: str, callee: FunctionDef | None, args: list[int],
                     frame: Frame, inst: Instruction) -> int:
        """Bodies of runtime-supplied declarations."""
        if (callee is not None and callee.is_known_dealloc) or name in DEALLOCATOR_NAMES:
            if not args:
                raise EngineError(f"@{name} called without a pointer")
            violation = intercept_free(self.shadow, args[0])
            if violation is not None:
                self.report(violation, frame, inst)
            return 0
        if name in ALLOCATOR_NAMES:
            if not args:
                raise EngineError(f"@{name} called without a size")
            pointer, _ = self.allocate(args[0], AllocKind.HEAP)
            return pointer
        raise EngineError(f"@{name} has no body")

    def ret(self, frame: Frame, inst: Instruction) -> int | None:
        value = self.value(frame, inst.operands[0]) if inst.operands else 0
        for alloc in frame.allocas:
            self.shadow.release(alloc)
        self.sp = frame.saved_sp
        self.stack.pop()
        if not self.stack:
            return value
        caller = self.stack[-1]
        if frame.result is not None:
            caller.values[frame.result] = value
        caller.index += 1
        return None

    # ------------------------------------------------------------------------
    # Step loop
    # ------------------------------------------------------------------------

    def step(self, frame: Frame, inst: Instruction) -> int | None:
        """Execute one instruction; returns the exit code when the program ends."""
        op = inst.opcode
        ops = inst.operands
        values = frame.values

        if op is Opcode.CHECK:
            site = inst.site
            self.outcome.counters[site.kind] += 1
            if site.kind.is_ensure:
                self.outcome.ensures += 1
            violation = check_predicate(self.shadow, self.value(frame, site.value), site.size)
            if violation is not None:
                self.report(violation, frame, inst)
            frame.index += 1
            return None

        self.outcome.instructions_retired += 1
        if op is Opcode.ALLOCA:
            values[inst.result], alloc = self.allocate(inst.shape.byte_size, AllocKind.STACK)
            frame.allocas.append(alloc)
        elif op is Opcode.HEAPALLOC:
            values[inst.result], _ = self.allocate(self.value(frame, ops[0]), AllocKind.HEAP)
        elif op is Opcode.HEAPFREE:
            violation = intercept_free(self.shadow, self.value(frame, ops[0]))
            if violation is not None:
                self.report(violation, frame, inst)
        elif op is Opcode.LOAD:
            address = TaggedAddress(self.value(frame, ops[0])).address
            values[inst.result] = self.memory.read(address, inst.shape.byte_size)
        elif op is Opcode.STORE:
            address = TaggedAddress(self.value(frame, ops[0])).address
            shape = self._shapes(frame.fn).get(ops[1])
            size = shape.byte_size if shape is not None else WORD_SIZE
            self.memory.write(address, size, self.value(frame, ops[1]))
        elif op is Opcode.GEP:
            base = TaggedAddress(self.value(frame, ops[0]))
            delta = inst.offset if len(ops) == 1 else self.value(frame, ops[1])
            values[inst.result] = TaggedAddress.make(base.address + delta, base.tag).value
        elif op in (Opcode.BITCAST, Opcode.CASTSAFE, Opcode.PTRTOINT, Opcode.INTTOPTR):
            values[inst.result] = self.value(frame, ops[0]) & WORD_MASK
        elif op is Opcode.PHI:
            raise EngineError(f"phi %{inst.result} after the head of block '{frame.block.label}'")
        elif op is Opcode.CALL:
            self.call(frame, inst)
            return None
        elif op is Opcode.BINOP:
            values[inst.result] = _mask(
                _binop(inst.binop, self.value(frame, ops[0]), self.value(frame, ops[1])),
                inst.shape,
            )
        elif op is Opcode.CMP:
            values[inst.result] = int(
                _compare(inst.binop, self.value(frame, ops[0]), self.value(frame, ops[1]))
            )
        elif op is Opcode.CONST:
            values[inst.result] = _mask(inst.imm, inst.shape)
        elif op is Opcode.GLOBALADDR:
            if inst.callee in self.globals:
                values[inst.result] = self.globals[inst.callee]
            elif inst.callee in self.code_addr:
                values[inst.result] = self.code_addr[inst.callee]
            else:
                raise EngineError(f"unknown symbol @{inst.callee}")
        elif op is Opcode.BR:
            self.enter(frame, inst.targets[0], frame.block.label)
            return None
        elif op is Opcode.CONDBR:
            taken = inst.targets[0] if self.value(frame, ops[0]) else inst.targets[1]
            self.enter(frame, taken, frame.block.label)
            return None
        elif op is Opcode.RET:
            return self.ret(frame, inst)
        else:  # pragma: no cover
            raise EngineError(f"unsupported opcode {op.value}")
        frame.index += 1
        return None

    def run(self, entry: str, args: tuple[int, ...] = ()) -> Outcome:
        fn = self.module.function(entry)
        if fn is None or fn.is_declaration:
            raise EngineError(f"entry function '{entry}' has no body")
        if len(args) != len(fn.params):
            raise EngineError(f"'{entry}' takes {len(fn.params)} arguments, got {len(args)}")
        frame = Frame(fn, fn.entry, values={p.name: a for p, a in zip(fn.params, args)},
                      saved_sp=self.sp)
        self.stack.append(frame)
        self.enter(frame, fn.entry.label, None)

        steps = 0
        try:
            while True:
                if steps >= self.config.max_steps:
                    self.outcome.verdict = Verdict.TIMEOUT
                    logger.info("%s: timeout after %d steps", entry, steps)
                    return self.outcome
                steps += 1
                frame = self.stack[-1]
                if frame.index >= len(frame.block.instructions):
                    raise EngineError(
                        f"fell off the end of block '{frame.block.label}' in '{frame.fn.name}'"
                    )
                exit_code = self.step(frame, frame.block.instructions[frame.index])
                if not self.stack:
                    self.outcome.exit_code = exit_code
                    return self.outcome
        except _Halt as halt:
            self.outcome.verdict = Verdict.VIOLATION
            self.outcome.violation = halt.violation
            return self.outcome


def _binop(op: str, a: int, b: int) -> int:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    raise EngineError(f"unknown binary operator '{op}'")


def _compare(pred: str, a: int, b: int) -> bool:
    if pred == "eq":
        return a == b
    if pred == "ne":
        return a != b
    if pred == "lt":
        return a < b
    if pred == "le":
        return a <= b
    if pred == "gt":
        return a > b
    if pred == "ge":
        return a >= b
    raise EngineError(f"unknown predicate '{pred}'")


def execute(
    m: ProgramModule,
    entry: str = "main",
    config: RuntimeConfig | None = None,
    args: tuple[int, ...] = (),
) -> Outcome:
    """Run ``entry`` of ``m`` to completion, a violation or the step limit.

    Args:
        m: A validated module, instrumented or not.
        entry: Name of a defined function.
        config: Memory layout, granule and step limit.
        args: Integer arguments for the entry function's params.

    Returns:
        The Outcome, with exact check and instruction counters.

    Raises:
        EngineError: If the module cannot be interpreted.
    """
    return Interpreter(m, config).run(entry, tuple(args))
