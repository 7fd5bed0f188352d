"""The mini-IR: shapes, kinds, instructions, modules, ABI rules and validation.

Example usage:
    from safeir.ir import Struct, I32, classify_abi

    classify_abi(Struct([I32, I32]))   # Aggregate()
"""

from safeir.ir.types import (
    AbiClass,
    Aggregate,
    Array,
    FnPtr,
    I8,
    I32,
    I64,
    Int,
    PtrKind,
    RawPtr,
    SafePtr,
    Scalar,
    ScalarPair,
    ShapeError,
    Slice,
    Struct,
    TraitObject,
    TypeShape,
    Uninhabited,
    Union,
    ZeroSized,
    check_shape,
    classify_abi,
    meet,
    pointee_of,
    pointer_leaves,
    shape_kind,
)
from safeir.ir.checks import CheckKind, CheckSite
from safeir.ir.instructions import Instruction, Opcode, SourceLocation, value_shape
from safeir.ir.module import (
    BasicBlock,
    ExternalDecl,
    FnAttr,
    FunctionDef,
    GlobalDef,
    Param,
    ProgramModule,
)
from safeir.ir.abi import default_decl_kind
from safeir.ir.validate import Diagnostic, block_graph, validate_module

__all__ = [
    "AbiClass",
    "Aggregate",
    "Array",
    "BasicBlock",
    "CheckKind",
    "CheckSite",
    "Diagnostic",
    "ExternalDecl",
    "FnAttr",
    "FnPtr",
    "FunctionDef",
    "GlobalDef",
    "I8",
    "I32",
    "I64",
    "Instruction",
    "Int",
    "Opcode",
    "Param",
    "ProgramModule",
    "PtrKind",
    "RawPtr",
    "SafePtr",
    "Scalar",
    "ScalarPair",
    "ShapeError",
    "Slice",
    "SourceLocation",
    "Struct",
    "TraitObject",
    "TypeShape",
    "Uninhabited",
    "Union",
    "ZeroSized",
    "block_graph",
    "check_shape",
    "classify_abi",
    "default_decl_kind",
    "meet",
    "pointee_of",
    "pointer_leaves",
    "shape_kind",
    "validate_module",
    "value_shape",
]
