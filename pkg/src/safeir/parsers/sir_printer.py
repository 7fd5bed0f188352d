"""Canonical ``.sir`` rendering of a ProgramModule.

print_module output parses back to an equal module; whitespace, comments and
attribute order of the original text are not preserved.
"""

from __future__ import annotations

from ..ir.instructions import Instruction, Opcode
from ..ir.module import FnAttr, FunctionDef, ProgramModule
from ..ir.types import PtrKind, TypeShape, shape_kind

INDENT = "  "


def _kind_suffix(shape: TypeShape, kind: PtrKind) -> str:
    if kind is PtrKind.NONPOINTER:
        return ":none" if shape_kind(shape) is not PtrKind.NONPOINTER else ""
    return f":{kind.value}"


def _args(values) -> str:
    return ", ".join(f"%{v}" for v in values)


def format_instruction(inst: Instruction) -> str:
    """One instruction, without indentation."""
    op = inst.opcode
    lhs = f"%{inst.result} = " if inst.result is not None else ""
    ops = inst.operands

    if op is Opcode.ALLOCA:
        body = f"alloca {inst.shape}"
    elif op is Opcode.HEAPALLOC:
        body = f"heapalloc %{ops[0]}"
    elif op is Opcode.HEAPFREE:
        body = f"heapfree %{ops[0]}"
    elif op is Opcode.LOAD:
        body = f"load {inst.shape}, %{ops[0]}"
    elif op is Opcode.STORE:
        body = f"store %{ops[0]}, %{ops[1]}"
    elif op is Opcode.GEP:
        index = f"%{ops[1]}" if len(ops) > 1 else str(inst.offset)
        body = f"gep %{ops[0]}, {index} -> {inst.shape}"
    elif op in (Opcode.BITCAST, Opcode.INTTOPTR, Opcode.CASTSAFE):
        body = f"{op.value} %{ops[0]} to {inst.shape}"
    elif op is Opcode.PTRTOINT:
        body = f"ptrtoint %{ops[0]}"
    elif op is Opcode.PHI:
        incoming = ", ".join(f"[{label}: %{value}]" for label, value in inst.incoming)
        body = f"phi {inst.shape} {incoming}"
    elif op is Opcode.CALL:
        shape = f"{inst.shape} " if inst.shape is not None else ""
        if inst.is_indirect_call:
            body = f"call {shape}%{ops[0]}({_args(ops[1:])})"
        else:
            body = f"call {shape}@{inst.callee}({_args(ops)})"
    elif op is Opcode.BINOP:
        body = f"{inst.binop} {inst.shape} %{ops[0]}, %{ops[1]}"
    elif op is Opcode.CMP:
        body = f"cmp {inst.binop} %{ops[0]}, %{ops[1]}"
    elif op is Opcode.CONST:
        body = f"const {inst.shape} {inst.imm}"
    elif op is Opcode.GLOBALADDR:
        body = f"globaladdr {inst.shape} @{inst.callee}"
    elif op is Opcode.BR:
        body = f"br {inst.targets[0]}"
    elif op is Opcode.CONDBR:
        body = f"condbr %{ops[0]}, {inst.targets[0]}, {inst.targets[1]}"
    elif op is Opcode.RET:
        body = f"ret %{ops[0]}" if ops else "ret"
    elif op is Opcode.CHECK:
        site = inst.site
        if site.kind.is_ensure:
            body = f"ensure %{site.value}, {site.size} {site.kind.value}"
        else:
            body = f"check %{site.value}, {site.size}"
    else:  # pragma: no cover
        raise ValueError(f"cannot print opcode {op}")
    return lhs + body


def format_signature(fn: FunctionDef) -> str:
    params = ", ".join(f"%{p.name}: {p.shape}{_kind_suffix(p.shape, p.kind)}" for p in fn.params)
    text = f"fn {fn.name}({params})"
    if fn.ret_shape is not None:
        text += f" -> {fn.ret_shape}{_kind_suffix(fn.ret_shape, fn.ret_kind)}"
    for attr in FnAttr:
        if attr in fn.attributes:
            text += f" {attr.value}"
    return text


def print_module(m: ProgramModule) -> str:
    """Render ``m`` as ``.sir`` text.

    Example:
        >>> print(print_module(ProgramModule("empty")), end="")
        module empty
    """
    header = f"module {m.name}"
    if m.instrumented:
        header += f" instrumented={m.instrumented}"
    lines = [header]

    if m.globals or m.externals:
        lines.append("")
    for glob in m.globals:
        lines.append(f"global @{glob.name}: {glob.shape}:{glob.kind.value} = {glob.init}")
    for ext in m.externals:
        lines.append(f"extern @{ext.name}" + (" nofree" if ext.nofree else ""))

    for fn in m.functions:
        lines.append("")
        signature = format_signature(fn)
        if fn.is_declaration:
            lines.append(signature)
            continue
        lines.append(signature + " {")
        for block in fn.blocks:
            lines.append(f"{block.label}:")
            lines.extend(INDENT + format_instruction(inst) for inst in block.instructions)
        lines.append("}")

    return "\n".join(lines) + "\n"
