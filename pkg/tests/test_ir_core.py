"""Tests for the IR core: kinds, shapes, ABI classification and validation.

Covers:
- meet (lattice laws against a brute-force table)
- classify_abi / shape_kind / pointee_of on every shape family
- check_shape rejections
- default_decl_kind per opcode, foreign demotion
- validate_module diagnostics on hand-built broken modules
"""

import itertools

import pytest

from safeir.harness.oracles import table_meet
from safeir.ir import (
    Aggregate,
    Array,
    CheckKind,
    FnPtr,
    I8,
    I32,
    I64,
    Instruction,
    Int,
    Opcode,
    PtrKind,
    RawPtr,
    SafePtr,
    Scalar,
    ScalarPair,
    ShapeError,
    Slice,
    SourceLocation,
    Struct,
    TraitObject,
    Uninhabited,
    Union,
    ZeroSized,
    check_shape,
    classify_abi,
    default_decl_kind,
    meet,
    pointee_of,
    pointer_leaves,
    shape_kind,
    validate_module,
)
from safeir.parsers import parse_module


def _codes(text: str) -> list[str]:
    return [d.code for d in validate_module(parse_module(text, validate=False))]


# ============================================================================
# Pointer kinds
# ============================================================================

class TestMeet:

    def test_examples(self):
        assert meet(PtrKind.SAFE, PtrKind.RAW) is PtrKind.RAW
        assert meet(PtrKind.SAFE, PtrKind.NOPTR) is PtrKind.SAFE
        assert meet(PtrKind.NOPTR, PtrKind.NOPTR) is PtrKind.NOPTR
        assert meet(PtrKind.SAFE, PtrKind.NONPOINTER) is PtrKind.RAW
        assert meet(PtrKind.NONPOINTER, PtrKind.NONPOINTER) is PtrKind.NONPOINTER

    def test_matches_table(self):
        for a, b in itertools.product(PtrKind, repeat=2):
            assert meet(a, b) is table_meet(a, b), (a, b)

    def test_commutative_associative_idempotent(self):
        kinds = list(PtrKind)
        for a, b in itertools.product(kinds, repeat=2):
            assert meet(a, b) is meet(b, a)
        for a, b, c in itertools.product(kinds, repeat=3):
            assert meet(meet(a, b), c) is meet(a, meet(b, c))
        for a in kinds:
            assert meet(a, a) is a

    def test_elidable_kinds(self):
        assert PtrKind.SAFE.is_elidable
        assert PtrKind.NOPTR.is_elidable
        assert not PtrKind.RAW.is_elidable
        assert not PtrKind.NONPOINTER.is_pointer


# ============================================================================
# Shapes and ABI classes
# ============================================================================

class TestClassifyAbi:

    def test_scalars(self):
        assert classify_abi(I32) == Scalar(PtrKind.NONPOINTER)
        assert classify_abi(SafePtr(I32)) == Scalar(PtrKind.SAFE)
        assert classify_abi(RawPtr(I32)) == Scalar(PtrKind.RAW)
        assert classify_abi(FnPtr()) == Scalar(PtrKind.NOPTR)

    def test_transparent_wrappers(self):
        assert classify_abi(Struct([RawPtr(I32)])) == Scalar(PtrKind.RAW)
        assert classify_abi(Struct([SafePtr(I64), ZeroSized()])) == Scalar(PtrKind.SAFE)
        assert classify_abi(Array(SafePtr(I8), 1)) == Scalar(PtrKind.SAFE)

    def test_fat_pointers(self):
        assert classify_abi(Slice(I8)) == ScalarPair(PtrKind.RAW, PtrKind.NONPOINTER)
        assert classify_abi(TraitObject()) == ScalarPair(PtrKind.RAW, PtrKind.SAFE)

    def test_aggregates_and_zero_sized(self):
        assert classify_abi(Struct([I32, I32])) == Aggregate()
        assert classify_abi(Array(I64, 4)) == Aggregate()
        assert classify_abi(ZeroSized()) == Uninhabited()
        assert classify_abi(Struct([])) == Uninhabited()
        assert classify_abi(Array(I64, 0)) == Uninhabited()

    def test_unions(self):
        assert classify_abi(Union([SafePtr(I32), SafePtr(I64)])) == Scalar(PtrKind.SAFE)
        assert classify_abi(Union([SafePtr(I32), I64])) == Scalar(PtrKind.RAW)
        assert classify_abi(Union([I32, I8])) == Scalar(PtrKind.NONPOINTER)
        assert classify_abi(Union([Struct([I64, I64]), I64])) == Aggregate()

    def test_scalar_safe_means_every_leaf_is_safe(self):
        shapes = [
            SafePtr(I32), Struct([SafePtr(I8)]), Union([SafePtr(I32), RawPtr(I32)]),
            Union([SafePtr(I32), SafePtr(Struct([I64]))]), Array(SafePtr(I64), 1),
            Struct([Struct([SafePtr(I64)]), ZeroSized()]),
        ]
        for shape in shapes:
            if classify_abi(shape) == Scalar(PtrKind.SAFE):
                assert all(isinstance(leaf, SafePtr) for leaf in pointer_leaves(shape)), shape

    def test_shape_kind(self):
        assert shape_kind(None) is PtrKind.NONPOINTER
        assert shape_kind(SafePtr(I64)) is PtrKind.SAFE
        assert shape_kind(Slice(I8)) is PtrKind.RAW
        assert shape_kind(Struct([I64, I64])) is PtrKind.NONPOINTER

    def test_pointee_of(self):
        assert pointee_of(SafePtr(I64)) == I64
        assert pointee_of(Struct([RawPtr(I32)])) == I32
        assert pointee_of(I64) is None
        assert pointee_of(Struct([SafePtr(I8), SafePtr(I8)])) is None

    def test_sizes_and_text(self):
        assert Struct([I64, I64]).byte_size == 16
        assert Slice(I64).byte_size == 16
        assert str(Struct([I64, SafePtr(I32)])) == "{i64, &i32}"
        assert str(Array(RawPtr(I8), 3)) == "[*i8; 3]"
        assert str(Union([I32, FnPtr()])) == "union{i32, fn}"


class TestCheckShape:

    def test_accepts_well_formed(self):
        check_shape(Struct([I64, Array(SafePtr(I8), 2), Slice(I32)]))

    @pytest.mark.parametrize("shape", [
        Int(7),
        Array(I64, -1),
        Union([]),
        SafePtr(Int(12)),
    ])
    def test_rejects_malformed(self, shape):
        with pytest.raises(ShapeError):
            check_shape(shape)

    def test_classify_rejects_malformed(self):
        with pytest.raises(ShapeError):
            classify_abi(Struct([Int(3)]))


# ============================================================================
# Declared kinds
# ============================================================================

class TestDefaultDeclKind:

    def test_opcode_kinds(self):
        assert default_decl_kind(
            Instruction(Opcode.ALLOCA, "a", shape=I64)
        ) is PtrKind.SAFE
        assert default_decl_kind(
            Instruction(Opcode.ALLOCA, "a", shape=Struct([I64, I64]))
        ) is PtrKind.NOPTR
        assert default_decl_kind(
            Instruction(Opcode.HEAPALLOC, "m", ("n",))
        ) is PtrKind.RAW
        assert default_decl_kind(
            Instruction(Opcode.CASTSAFE, "s", ("r",), shape=SafePtr(I64))
        ) is PtrKind.SAFE
        assert default_decl_kind(
            Instruction(Opcode.LOAD, "v", ("p",), shape=SafePtr(I64))
        ) is PtrKind.SAFE
        assert default_decl_kind(
            Instruction(Opcode.CONST, "c", shape=I64, imm=1)
        ) is PtrKind.NONPOINTER

    def test_derived_opcodes_have_no_declared_kind(self):
        assert default_decl_kind(
            Instruction(Opcode.BITCAST, "b", ("a",), shape=SafePtr(I64))
        ) is None

    def test_foreign_demotes_pointers(self):
        inst = Instruction(Opcode.CASTSAFE, "s", ("r",), shape=SafePtr(I64))
        assert default_decl_kind(inst, foreign=True) is PtrKind.RAW
        const = Instruction(Opcode.CONST, "c", shape=I64, imm=1)
        assert default_decl_kind(const, foreign=True) is PtrKind.NONPOINTER

    def test_requires_a_result(self):
        with pytest.raises(ValueError):
            default_decl_kind(Instruction(Opcode.RET))

    def test_call_uses_callee_signature(self, loop_cast):
        call = next(i for _, _, i in loop_cast.function("foo").instructions()
                    if i.opcode is Opcode.CALL and i.callee == "c_create")
        assert default_decl_kind(call, loop_cast) is PtrKind.RAW


# ============================================================================
# Checks and locations
# ============================================================================

class TestChecksAndLocations:

    def test_ensure_kinds(self):
        assert not CheckKind.DEREF.is_ensure
        assert all(k.is_ensure for k in CheckKind if k is not CheckKind.DEREF)
        assert CheckKind.from_token("ret") is CheckKind.RETURN
        with pytest.raises(ValueError):
            CheckKind.from_token("bogus")

    def test_location(self):
        assert str(SourceLocation("a.sir", 3, 5)) == "a.sir:3:5"
        with pytest.raises(ValueError):
            SourceLocation("a.sir", 0)


# ============================================================================
# Validation
# ============================================================================

class TestValidate:

    def test_fixture_is_valid(self, loop_cast):
        assert validate_module(loop_cast) == []

    def test_unresolved_callee(self):
        assert "unresolved-callee" in _codes(
            "module m\nfn main() {\nentry:\n  call @nowhere()\n  ret\n}\n"
        )

    def test_castsafe_in_foreign_code(self):
        codes = _codes(
            "module m\n"
            "fn f(%r: *i64:raw) foreign {\nentry:\n  %s = castsafe %r to &i64\n  ret\n}\n"
        )
        assert "foreign-cast" in codes

    def test_foreign_safe_parameter(self):
        codes = _codes("module m\nfn f(%p: &i64:safe) foreign {\nentry:\n  ret\n}\n")
        assert "foreign-safe" in codes

    def test_missing_terminator_and_unknown_block(self):
        codes = _codes(
            "module m\nfn f() {\nentry:\n  %c = const i64 1\nnext:\n  br gone\n}\n"
        )
        assert "missing-terminator" in codes
        assert "unknown-block" in codes

    def test_use_not_dominated(self):
        codes = _codes(
            "module m\n"
            "fn f(%c: i64) -> i64 {\n"
            "entry:\n  condbr %c, a, b\n"
            "a:\n  %x = const i64 1\n  br b\n"
            "b:\n  ret %x\n}\n"
        )
        assert "ssa-dominance" in codes

    def test_return_mismatch(self):
        assert "return-mismatch" in _codes("module m\nfn f() -> i64 {\nentry:\n  ret\n}\n")

    def test_castsafe_of_safe_value(self):
        codes = _codes(
            "module m\n"
            "fn f(%p: &i64:safe) {\nentry:\n  %s = castsafe %p to &i64\n  ret\n}\n"
        )
        assert codes == ["cast-operand-not-raw"]

    def test_unresolved_global(self):
        codes = _codes("module m\nfn f() {\nentry:\n  %g = globaladdr &i64 @nope\n  ret\n}\n")
        assert "unresolved-global" in codes
