"""Tests for the pointer-kind dataflow.

Covers:
- infer_kinds on straight-line code, bitcasts, geps, phis and loops
- derive_gep_kind bounds
- foreign demotion
- TypeFlowError for unknown values
- agreement with the chaotic-iteration oracle on random programs
- a RAW phi input never leaves the phi SAFE
- totality over the corpus
"""

import numpy as np
import pytest

from safeir.analysis import TypeFlowError, derive_gep_kind, infer_kinds, is_safe_pointer
from safeir.harness.oracles import oracle_kinds, random_program
from safeir.ir import I32, I64, PtrKind, Struct
from safeir.parsers import parse_module


def _kinds(body: str, params: str = "%a: &{i64, i64}:safe, %r: *{i64, i64}:raw, %n: i64",
           attrs: str = "") -> dict:
    text = f"module t\nfn f({params}) {attrs} {{\n{body}\n}}\n"
    m = parse_module(text)
    return dict(infer_kinds(m.function("f"), m).items())



def _join(incoming: list[str]) -> str:
    """Body whose block ``join`` merges ``incoming`` in a phi %p, one predecessor each."""
    lines = ["entry:", "  br b0"]
    for i in range(len(incoming)):
        branch = "br join" if i == len(incoming) - 1 else f"condbr %n, join, b{i + 1}"
        lines += [f"b{i}:", f"  {branch}"]
    pairs = ", ".join(f"[b{i}: {value}]" for i, value in enumerate(incoming))
    lines += ["join:", f"  %p = phi &{{i64, i64}} {pairs}", "  ret"]
    return "\n".join(lines)


# ============================================================================
# derive_gep_kind
# ============================================================================

class TestDeriveGepKind:

    def test_in_bounds_keeps_kind(self):
        pair = Struct([I32, I32])
        assert derive_gep_kind(PtrKind.SAFE, pair, 4, 4) is PtrKind.SAFE
        assert derive_gep_kind(PtrKind.NOPTR, pair, 0, 8) is PtrKind.NOPTR

    def test_out_of_bounds_is_raw(self):
        pair = Struct([I32, I32])
        assert derive_gep_kind(PtrKind.SAFE, pair, 8, 4) is PtrKind.RAW
        assert derive_gep_kind(PtrKind.SAFE, pair, 6, 4) is PtrKind.RAW
        assert derive_gep_kind(PtrKind.SAFE, pair, -4, 4) is PtrKind.RAW

    def test_dynamic_offset_is_raw(self):
        assert derive_gep_kind(PtrKind.SAFE, Struct([I64, I64]), None, 8) is PtrKind.RAW

    def test_raw_base_stays_raw(self):
        assert derive_gep_kind(PtrKind.RAW, Struct([I64, I64]), 0, 8) is PtrKind.RAW

    def test_unknown_pointee_is_raw(self):
        assert derive_gep_kind(PtrKind.SAFE, None, 0, 8) is PtrKind.RAW


# ============================================================================
# infer_kinds
# ============================================================================

class TestInferKinds:

    def test_declared_kinds(self):
        kinds = _kinds(
            "entry:\n"
            "  %m = heapalloc %n\n"
            "  %s = castsafe %r to &{i64, i64}\n"
            "  %l = alloca i64\n"
            "  %c = const i64 1\n"
            "  ret"
        )
        assert kinds["a"] is PtrKind.SAFE
        assert kinds["r"] is PtrKind.RAW
        assert kinds["n"] is PtrKind.NONPOINTER
        assert kinds["m"] is PtrKind.RAW
        assert kinds["s"] is PtrKind.SAFE
        assert kinds["l"] is PtrKind.SAFE
        assert kinds["c"] is PtrKind.NONPOINTER

    def test_bitcast_forwards_operand_kind(self):
        kinds = _kinds(
            "entry:\n"
            "  %x = bitcast %r to &{i64, i64}\n"
            "  %y = bitcast %a to *{i64, i64}\n"
            "  ret"
        )
        assert kinds["x"] is PtrKind.RAW
        assert kinds["y"] is PtrKind.SAFE

    def test_gep_bounds(self):
        kinds = _kinds(
            "entry:\n"
            "  %f = gep %a, 8 -> &i64\n"
            "  %g = gep %a, 16 -> &i64\n"
            "  %i = const i64 8\n"
            "  %h = gep %a, %i -> &i64\n"
            "  ret"
        )
        assert kinds["f"] is PtrKind.SAFE
        assert kinds["g"] is PtrKind.RAW
        assert kinds["h"] is PtrKind.RAW

    def test_phi_meets_inputs(self):
        kinds = _kinds(
            "entry:\n"
            "  condbr %n, left, right\n"
            "left:\n"
            "  br join\n"
            "right:\n"
            "  br join\n"
            "join:\n"
            "  %p = phi *{i64, i64} [left: %a], [right: %r]\n"
            "  %q = phi &{i64, i64} [left: %a], [right: %a]\n"
            "  ret"
        )
        assert kinds["p"] is PtrKind.RAW
        assert kinds["q"] is PtrKind.SAFE

    def test_loop_carried_phi_stays_safe(self):
        kinds = _kinds(
            "entry:\n"
            "  br loop\n"
            "loop:\n"
            "  %p = phi &{i64, i64} [entry: %a], [loop: %c]\n"
            "  %c = bitcast %p to &{i64, i64}\n"
            "  condbr %n, loop, exit\n"
            "exit:\n"
            "  ret"
        )
        assert kinds["p"] is PtrKind.SAFE
        assert kinds["c"] is PtrKind.SAFE

    def test_loop_with_raw_input_degrades(self):
        kinds = _kinds(
            "entry:\n"
            "  br loop\n"
            "loop:\n"
            "  %p = phi &{i64, i64} [entry: %a], [loop: %c]\n"
            "  %c = bitcast %r to &{i64, i64}\n"
            "  condbr %n, loop, exit\n"
            "exit:\n"
            "  ret"
        )
        assert kinds["p"] is PtrKind.RAW

    def test_foreign_function_is_all_raw(self):
        kinds = _kinds(
            "entry:\n"
            "  %l = alloca i64\n"
            "  %g = gep %r, 0 -> *i64\n"
            "  ret",
            params="%r: *{i64, i64}:raw, %n: i64",
            attrs="foreign",
        )
        assert kinds["l"] is PtrKind.RAW
        assert kinds["g"] is PtrKind.RAW
        assert kinds["n"] is PtrKind.NONPOINTER

    def test_loop_cast_field_pointers_are_safe(self, loop_cast):
        km = infer_kinds(loop_cast.function("foo"), loop_cast)
        for value in ("p", "s", "fa", "fb", "c", "d"):
            assert is_safe_pointer(km, value), value
        assert not is_safe_pointer(km, "raw")

    def test_unknown_value_raises(self, loop_cast):
        km = infer_kinds(loop_cast.function("foo"), loop_cast)
        with pytest.raises(TypeFlowError):
            km["nope"]
        with pytest.raises(TypeFlowError):
            is_safe_pointer(km, "nope")

    def test_histogram_counts_every_value(self, loop_cast):
        km = infer_kinds(loop_cast.function("foo"), loop_cast)
        assert sum(km.histogram().values()) == len(km)


# ============================================================================
# Properties
# ============================================================================

class TestInferKindsProperties:

    def test_matches_oracle_on_random_programs(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            m = random_program(rng)
            fn = m.function("f")
            expected = oracle_kinds(fn, m, np.random.default_rng(seed + 1))
            assert dict(infer_kinds(fn, m).items()) == expected, f"seed {seed}"

    def test_raw_incoming_never_yields_safe(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            count = int(rng.integers(1, 6))
            incoming = ["%a" if rng.random() < 0.7 else "%r" for _ in range(count)]
            before = _kinds(_join(incoming))["p"]
            assert before is (PtrKind.RAW if "%r" in incoming else PtrKind.SAFE), f"seed {seed}"
            position = int(rng.integers(len(incoming) + 1))
            widened = incoming[:position] + ["%r"] + incoming[position:]
            assert _kinds(_join(widened))["p"] is PtrKind.RAW, f"seed {seed}"

    def test_total_on_corpus(self, corpus):
        for case in corpus:
            m = case.program
            for fn in m.defined_functions():
                km = infer_kinds(fn, m)
                assert set(fn.value_shapes()) <= set(km.kinds), (case.id, fn.name)
