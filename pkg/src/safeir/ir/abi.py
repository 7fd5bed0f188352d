"""Declared pointer kinds of freshly defined values."""

from __future__ import annotations

from .instructions import Instruction, Opcode, value_shape
from .module import ProgramModule
from .types import Aggregate, PtrKind, classify_abi, shape_kind

_NON_POINTER_OPS = frozenset({Opcode.CONST, Opcode.BINOP, Opcode.CMP, Opcode.PTRTOINT})


def _call_kind(inst: Instruction, module: ProgramModule | None) -> PtrKind:
    if module is not None and inst.callee is not None:
        callee = module.function(inst.callee)
        if callee is not None:
            return callee.ret_kind
    return shape_kind(inst.shape)


def _globaladdr_kind(inst: Instruction, module: ProgramModule | None) -> PtrKind:
    if module is not None:
        glob = module.get_global(inst.callee)
        if glob is not None:
            return glob.kind
        if module.function(inst.callee) is not None:
            return PtrKind.NOPTR
    return shape_kind(inst.shape)


def default_decl_kind(
    inst: Instruction,
    module: ProgramModule | None = None,
    *,
    foreign: bool = False,
) -> PtrKind | None:
    """Kind a value receives at its definition, before any forwarding.

    Args:
        inst: A value-defining instruction.
        module: Enclosing module, used to look up callee return kinds and
            global address kinds. Without it the instruction's own shape
            decides.
        foreign: True when ``inst`` belongs to a FOREIGN function. Foreign code
            has only raw pointers, so every pointer kind is demoted to RAW.

    Returns:
        The declared kind, or None for bitcast, gep and phi whose kinds are
        derived from their operands by type_flow.

    Raises:
        ValueError: If ``inst`` defines no value.
    """
    if inst.result is None:
        raise ValueError(f"instruction {inst.uid or inst.opcode.value} defines no value")

    op = inst.opcode
    if op in (Opcode.BITCAST, Opcode.GEP, Opcode.PHI):
        return None

    if op is Opcode.ALLOCA:
        kind = PtrKind.NOPTR if isinstance(classify_abi(inst.shape), Aggregate) else PtrKind.SAFE
    elif op in (Opcode.HEAPALLOC, Opcode.INTTOPTR):
        kind = PtrKind.RAW
    elif op is Opcode.CASTSAFE:
        kind = PtrKind.SAFE
    elif op is Opcode.LOAD:
        kind = shape_kind(inst.shape)
    elif op is Opcode.CALL:
        kind = _call_kind(inst, module)
    elif op is Opcode.GLOBALADDR:
        kind = _globaladdr_kind(inst, module)
    elif op in _NON_POINTER_OPS:
        kind = PtrKind.NONPOINTER
    else:
        kind = shape_kind(value_shape(inst))

    if foreign and kind.is_pointer:
        return PtrKind.RAW
    return kind
