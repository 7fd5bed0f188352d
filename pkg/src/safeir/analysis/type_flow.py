"""Intraprocedural pointer-kind dataflow.

Every value of a function is classified SAFE, RAW, NOPTR or NONPOINTER.
Definitions seed the map (params from their declarations, everything else
from default_decl_kind); bitcasts forward their operand's kind, geps go
through derive_gep_kind and phis take the meet of their inputs.

Design decisions:
- Optimistic fixpoint: flow-derived values start at "top" (unknown) and only
  ever move down the lattice, so a loop-carried phi fed only by SAFE inputs
  stays SAFE.
- A value still unknown at the fixpoint (e.g. a phi fed only by itself) is an
  error, never a silent default.
- The analysis looks at one function at a time. Callee bodies are never
  consulted, only declared signatures.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from ..exceptions import SafeIRError
from ..ir.abi import default_decl_kind
from ..ir.instructions import Opcode
from ..ir.module import FunctionDef, ProgramModule
from ..ir.types import PtrKind, TypeShape, meet, pointee_of

logger = logging.getLogger(__name__)


class TypeFlowError(SafeIRError):
    """Raised when a value cannot be classified or is unknown to a KindMap."""
    pass


@dataclass
class KindMap:
    """Pointer kind of every value id in one function."""

    function: str
    kinds: dict[str, PtrKind] = field(default_factory=dict)

    def __getitem__(self, value: str) -> PtrKind:
        try:
            return self.kinds[value]
        except KeyError:
            raise TypeFlowError(f"%{value} is not a value of function '{self.function}'") from None

    def __contains__(self, value: str) -> bool:
        return value in self.kinds

    def __len__(self) -> int:
        return len(self.kinds)

    def items(self):
        return self.kinds.items()

    def histogram(self) -> dict[str, int]:
        """Number of values per kind, keyed by kind name."""
        counts = Counter(kind.name for kind in self.kinds.values())
        return {kind.name: counts.get(kind.name, 0) for kind in PtrKind}


def derive_gep_kind(
    base_kind: PtrKind,
    base_shape: TypeShape | None,
    offset: int | None,
    access_size: int = 1,
) -> PtrKind:
    """Kind of a gep result.

    Args:
        base_kind: Kind of the base pointer.
        base_shape: Shape of the object the base points to.
        offset: Static byte offset, or None for a dynamic index.
        access_size: Bytes accessed through the result.

    Returns:
        RAW for raw bases, dynamic offsets and accesses that may leave the
        base object; otherwise the base kind.

    Example:
        >>> derive_gep_kind(PtrKind.SAFE, Struct([I32, I32]), 4, 4)
        <PtrKind.SAFE: 'safe'>
    """
    if base_kind not in (PtrKind.SAFE, PtrKind.NOPTR):
        return PtrKind.RAW
    if offset is None or base_shape is None:
        return PtrKind.RAW
    if offset < 0 or offset + access_size > base_shape.byte_size:
        return PtrKind.RAW
    return base_kind


def _access_size(shape: TypeShape | None) -> int:
    pointee = pointee_of(shape) if shape is not None else None
    if pointee is None:
        return 1
    return max(pointee.byte_size, 1)


def infer_kinds(fn: FunctionDef, module: ProgramModule | None = None) -> KindMap:
    """Classify every value of ``fn``.

    Args:
        fn: A validated function (declarations yield a map of their params).
        module: Enclosing module, for callee return kinds and global kinds.

    Returns:
        A total KindMap at fixpoint.

    Raises:
        TypeFlowError: If an operand is undefined or a value stays unknown.
    """
    foreign = fn.is_foreign
    shapes = fn.value_shapes()
    kinds: dict[str, PtrKind | None] = {}

    for param in fn.params:
        kind = param.kind
        kinds[param.name] = PtrKind.RAW if foreign and kind.is_pointer else kind

    derived = []
    for _, _, inst in fn.instructions(include_checks=False):
        if inst.result is None:
            continue
        kinds[inst.result] = default_decl_kind(inst, module, foreign=foreign)
        if inst.opcode in (Opcode.BITCAST, Opcode.GEP, Opcode.PHI):
            derived.append(inst)

    def kind_of(value: str) -> PtrKind | None:
        if value not in kinds:
            raise TypeFlowError(f"%{value} used in '{fn.name}' but never defined")
        return kinds[value]

    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        for inst in derived:
            if inst.opcode is Opcode.BITCAST:
                new = kind_of(inst.operands[0])
            elif inst.opcode is Opcode.GEP:
                base = inst.operands[0]
                base_kind = kind_of(base)
                if len(inst.operands) > 1:
                    kind_of(inst.operands[1])
                if base_kind is None:
                    new = None
                else:
                    base_shape = shapes.get(base)
                    new = derive_gep_kind(
                        base_kind,
                        pointee_of(base_shape) if base_shape is not None else None,
                        inst.offset if len(inst.operands) == 1 else None,
                        _access_size(inst.shape),
                    )
            else:
                new = None
                for _, value in inst.incoming:
                    incoming = kind_of(value)
                    if incoming is not None:
                        new = incoming if new is None else meet(new, incoming)
            if new is not None and foreign and new.is_pointer:
                new = PtrKind.RAW
            old = kinds[inst.result]
            if new is not None and old is not None:
                new = meet(old, new)
            if new != old:
                kinds[inst.result] = new
                changed = True

    unresolved = sorted(value for value, kind in kinds.items() if kind is None)
    if unresolved:
        raise TypeFlowError(
            f"no derivable kind for %{unresolved[0]} in '{fn.name}'"
            + (f" (and {len(unresolved) - 1} more)" if len(unresolved) > 1 else "")
        )

    logger.debug("kinds for %s reached fixpoint after %d rounds", fn.name, rounds)
    return KindMap(fn.name, dict(kinds))


def is_safe_pointer(km: KindMap, value: str) -> bool:
    """True iff dereferencing ``value`` needs no dynamic check (SAFE or NOPTR).

    Raises:
        TypeFlowError: If ``value`` is not in the map.
    """
    return km[value].is_elidable
