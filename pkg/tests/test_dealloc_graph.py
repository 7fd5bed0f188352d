"""Tests for the nofree call-graph analysis and heap check placement.

Covers:
- build_call_graph flags and edges, allocators as nofree
- compute_nofree on hand-built graphs (SCCs, externals, DB overrides),
  against the reachability oracle on random graphs up to 200 nodes, and
  monotone under added calls
- NofreeDb record/merge rules, TSV persistence and its error reporting
- compile_units: dependency order, split-order independence, cycles, and
  units analysed one at a time in any order
- insert_heap_checks against the path-enumeration oracle
"""

import numpy as np
import pytest

from safeir.analysis import (
    CallGraph,
    NofreeDb,
    NofreeDbError,
    Verdict,
    build_call_graph,
    compile_units,
    compute_nofree,
    infer_kinds,
    insert_heap_checks,
    load_nofree_db,
    save_nofree_db,
    unit_dependencies,
)
from safeir.harness.oracles import (
    oracle_heap_anchors,
    oracle_nofree,
    random_call_graph,
    random_cfg_function,
    split_module,
)
from safeir.ir import CheckKind
from safeir.parsers import parse_module

NOFREE, MAYFREE = Verdict.NOFREE, Verdict.MAYFREE

LAYERED = """\
module layered

fn leaf() -> i64 {
entry:
  %c = const i64 1
  ret %c
}

fn middle() -> i64 {
entry:
  %v = call i64 @leaf()
  ret %v
}

fn top(%p: *i8:raw) {
entry:
  %v = call i64 @middle()
  call @free(%p)
  ret
}

fn free(%p: *i8:raw) known_dealloc
"""


# ============================================================================
# Call graph
# ============================================================================

class TestBuildCallGraph:

    def test_edges_and_flags(self):
        m = parse_module(
            "module m\n"
            "extern @ext\n"
            "fn a(%f: fn, %p: *i8:raw) {\nentry:\n"
            "  call @b()\n  call %f()\n  heapfree %p\n  ret\n}\n"
            "fn b() {\nentry:\n  call @ext()\n  ret\n}\n"
        )
        g = build_call_graph(m)
        assert g.edges == [("a", "b"), ("b", "ext")]
        assert g.flags("a")["has_indirect_call"]
        assert g.flags("a")["frees_directly"]
        assert not g.flags("b")["frees_directly"]
        assert g.defined_functions() == ["a", "b"]
        assert not g.flags("ext")["defined"]

    def test_fixture_graph(self, loop_cast):
        g = build_call_graph(loop_cast)
        assert g.callees("main") == ["foo"]
        assert g.callees("foo") == ["c_create", "do_some"]

    def test_unknown_flag(self):
        g = CallGraph()
        g.add_function("f", defined=True)
        with pytest.raises(ValueError):
            g.set_flag("f", "bogus")

    def test_allocators_are_declared_nofree(self):
        m = parse_module(
            "module m\n"
            "extern @malloc\n"
            "extern @ext\n"
            "fn f() {\nentry:\n  call @malloc()\n  ret\n}\n"
        )
        g = build_call_graph(m)
        assert g.flags("malloc")["nofree_declared"]
        assert not g.flags("ext")["nofree_declared"]
        assert compute_nofree(g).verdict("f") is NOFREE


# ============================================================================
# compute_nofree
# ============================================================================

class TestComputeNofree:

    def test_layered_module(self):
        db = compute_nofree(build_call_graph(parse_module(LAYERED)))
        assert db.verdict("leaf") is NOFREE
        assert db.verdict("middle") is NOFREE
        assert db.verdict("top") is MAYFREE
        assert db.verdict("free") is MAYFREE
        assert db.entries["leaf"].unit == "layered"

    def test_fixture_verdicts(self, loop_cast):
        db = compute_nofree(build_call_graph(loop_cast))
        assert db.verdict("do_some") is NOFREE
        assert db.verdict("c_create") is NOFREE
        assert db.verdict("foo") is NOFREE
        assert db.verdict("main") is NOFREE

    def test_cycle_shares_one_verdict(self):
        g = CallGraph.from_edges(
            ["a", "b", "c"], [("a", "b"), ("b", "a"), ("b", "c")], frees=["c"]
        )
        db = compute_nofree(g)
        assert db.verdict("a") is db.verdict("b") is MAYFREE

    def test_cycle_without_frees_is_nofree(self):
        g = CallGraph.from_edges(["a", "b"], [("a", "b"), ("b", "a")])
        db = compute_nofree(g)
        assert db.verdict("a") is NOFREE
        assert db.verdict("b") is NOFREE

    def test_unknown_external_is_mayfree(self):
        g = CallGraph.from_edges(["a"], [("a", "ext")])
        assert compute_nofree(g).verdict("a") is MAYFREE

    def test_db_verdict_for_external(self):
        g = CallGraph.from_edges(["a"], [("a", "ext")])
        known = NofreeDb()
        known.record("ext", NOFREE, "dep")
        db = compute_nofree(g, known)
        assert db.verdict("a") is NOFREE
        assert db.entries["ext"].unit == "dep"

    def test_declared_nofree_external(self):
        g = CallGraph.from_edges(["a"], [("a", "x")], nofree_externals=["x"])
        assert compute_nofree(g).verdict("a") is NOFREE

    def test_assumptions_are_not_recorded(self):
        g = CallGraph.from_edges(["a"], [("a", "ext"), ("a", "x")], nofree_externals=["x"])
        assert list(compute_nofree(g).entries) == ["a"]
        view = compute_nofree(g, with_assumptions=True).to_dict()
        assert view["ext"] == {"verdict": "MAYFREE", "unit": ""}
        assert view["x"] == {"verdict": "NOFREE", "unit": ""}

    @pytest.mark.parametrize("flag", ["unknown", "indirect", "frees"])
    def test_local_flags_make_mayfree(self, flag):
        g = CallGraph.from_edges(["a", "b"], [("b", "a")], **{flag: ["a"]})
        db = compute_nofree(g)
        assert db.verdict("a") is MAYFREE
        assert db.verdict("b") is MAYFREE

    def test_matches_reachability_oracle(self):
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            g, known = random_call_graph(rng, max_nodes=60)
            db = compute_nofree(g, known)
            for name, verdict in oracle_nofree(g, known).items():
                assert db.verdict(name) is verdict, f"seed {seed}: {name}"

    def test_matches_reachability_oracle_on_large_graphs(self):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            g, known = random_call_graph(rng, max_nodes=200, min_nodes=180)
            db = compute_nofree(g, known)
            for name, verdict in oracle_nofree(g, known).items():
                assert db.verdict(name) is verdict, f"seed {seed}: {name}"

    def test_added_call_never_removes_mayfree(self):
        for seed in range(300):
            rng = np.random.default_rng(seed)
            g, known = random_call_graph(rng, max_nodes=40)
            before = compute_nofree(g, known)
            nodes, defined = g.nodes, g.defined_functions()
            for _ in range(3):
                caller = defined[int(rng.integers(len(defined)))]
                g.add_call(caller, nodes[int(rng.integers(len(nodes)))])
            after = compute_nofree(g, known)
            for name in defined:
                if before.verdict(name) is MAYFREE:
                    assert after.verdict(name) is MAYFREE, f"seed {seed}: {name}"


# ============================================================================
# NofreeDb
# ============================================================================

class TestNofreeDb:

    def test_unknown_name_is_mayfree(self):
        db = NofreeDb()
        assert db.get("f") is None
        assert db.verdict("f") is MAYFREE
        assert not db.is_nofree("f")

    def test_mayfree_is_never_upgraded(self):
        db = NofreeDb()
        db.record("f", MAYFREE, "u1")
        db.record("f", NOFREE, "u2")
        assert db.verdict("f") is MAYFREE
        db.record("g", NOFREE)
        db.record("g", MAYFREE)
        assert db.verdict("g") is MAYFREE

    def test_unit_replaces_its_own_verdict(self):
        db = NofreeDb()
        db.record("f", MAYFREE, "lib")
        db.record("f", NOFREE, "lib")
        assert db.verdict("f") is NOFREE

    def test_unit_replaces_an_assumption(self):
        db = NofreeDb()
        db.record("f", MAYFREE)
        db.record("f", NOFREE)
        assert db.verdict("f") is MAYFREE
        db.record("f", NOFREE, "lib")
        assert db.to_dict() == {"f": {"verdict": "NOFREE", "unit": "lib"}}

    def test_merge_prefers_mayfree(self):
        a, b = NofreeDb(), NofreeDb()
        a.record("f", NOFREE, "a")
        a.record("g", NOFREE, "a")
        b.record("f", MAYFREE, "b")
        b.record("h", NOFREE, "b")
        merged = a.merge(b)
        assert merged.to_dict() == {
            "f": {"verdict": "MAYFREE", "unit": "b"},
            "g": {"verdict": "NOFREE", "unit": "a"},
            "h": {"verdict": "NOFREE", "unit": "b"},
        }
        assert a.verdict("f") is NOFREE

    def test_tsv_round_trip(self, tmp_path):
        db = NofreeDb()
        db.record("b_fn", MAYFREE, "unit2")
        db.record("a_fn", NOFREE, "unit1")
        path = tmp_path / "nofree.tsv"
        save_nofree_db(db, path)
        assert path.read_text().splitlines() == [
            "a_fn\tNOFREE\tunit1",
            "b_fn\tMAYFREE\tunit2",
        ]
        assert load_nofree_db(path) == db

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "nofree.tsv"
        path.write_text("# header\n\nf\tNOFREE\tu\n")
        assert load_nofree_db(path).verdict("f") is NOFREE

    def test_malformed_line_is_located(self, tmp_path):
        path = tmp_path / "nofree.tsv"
        path.write_text("f\tNOFREE\tu\ng NOFREE\n")
        with pytest.raises(NofreeDbError) as exc:
            load_nofree_db(path)
        assert exc.value.line == 2
        assert exc.value.path == path

    def test_unknown_verdict(self, tmp_path):
        path = tmp_path / "nofree.tsv"
        path.write_text("f\tMAYBE\tu\n")
        with pytest.raises(NofreeDbError) as exc:
            load_nofree_db(path)
        assert exc.value.line == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(NofreeDbError):
            load_nofree_db(tmp_path / "missing.tsv")


# ============================================================================
# Compilation units
# ============================================================================

class TestCompileUnits:

    def test_split_order_does_not_matter(self):
        whole = parse_module(LAYERED)
        expected = compute_nofree(build_call_graph(whole))
        low = split_module(whole, {"leaf"}, "low")
        high = split_module(whole, {"middle", "top"}, "high")
        for units in ([low, high], [high, low]):
            db = compile_units(units)
            for name in ("leaf", "middle", "top"):
                assert db.verdict(name) is expected.verdict(name), name

    def test_units_analysed_one_at_a_time(self):
        whole = parse_module(LAYERED)
        low = split_module(whole, {"leaf"}, "low")
        high = split_module(whole, {"middle", "top"}, "high")
        db = compute_nofree(build_call_graph(high))
        assert "leaf" not in db
        assert db.verdict("middle") is MAYFREE
        db = compute_nofree(build_call_graph(low), db)
        assert db.to_dict()["leaf"] == {"verdict": "NOFREE", "unit": "low"}
        db = compute_nofree(build_call_graph(high), db)
        assert db.verdict("middle") is NOFREE
        assert db.verdict("top") is MAYFREE

    def test_three_units(self):
        whole = parse_module(LAYERED)
        units = [split_module(whole, {name}, f"u_{name}") for name in ("top", "leaf", "middle")]
        assert sorted(unit_dependencies(units).edges) == [
            ("u_middle", "u_leaf"), ("u_top", "u_middle")
        ]
        db = compile_units(units)
        assert db.verdict("middle") is NOFREE
        assert db.entries["middle"].unit == "u_middle"
        assert db.verdict("top") is MAYFREE

    def test_fixture_split(self, loop_cast):
        expected = compute_nofree(build_call_graph(loop_cast))
        units = [
            split_module(loop_cast, {"main", "foo"}, "app"),
            split_module(loop_cast, {"c_create", "do_some"}, "lib"),
        ]
        db = compile_units(units)
        for name in ("main", "foo", "c_create", "do_some"):
            assert db.verdict(name) is expected.verdict(name)

    def test_cyclic_units(self):
        m = parse_module(
            "module m\n"
            "fn a() {\nentry:\n  call @b()\n  ret\n}\n"
            "fn b() {\nentry:\n  call @a()\n  ret\n}\n"
        )
        units = [split_module(m, {"a"}, "ua"), split_module(m, {"b"}, "ub")]
        with pytest.raises(NofreeDbError):
            compile_units(units)


# ============================================================================
# Heap checks
# ============================================================================

class TestInsertHeapChecks:

    def test_access_after_free_call(self):
        m = parse_module(
            "module m\n"
            "extern @may_free\n"
            "extern @no_free nofree\n"
            "fn f(%p: &{i64, i64}:safe) -> i64 {\nentry:\n"
            "  %a = load i64, %p\n"
            "  call @no_free()\n"
            "  %b = load i64, %p\n"
            "  call @may_free()\n"
            "  %c = load i64, %p\n"
            "  ret %c\n}\n"
        )
        fn = m.function("f")
        db = compute_nofree(build_call_graph(m), with_assumptions=True)
        sites = insert_heap_checks(fn, db, infer_kinds(fn, m))
        assert [(s.kind, s.anchor, s.value, s.size) for s in sites] == [
            (CheckKind.HEAP, "c", "p", 8)
        ]

    def test_allocator_call_needs_no_heap_check(self):
        m = parse_module(
            "module m\n"
            "extern @malloc\n"
            "fn f(%p: &i64:safe) -> i64 {\nentry:\n"
            "  call @malloc()\n  %v = load i64, %p\n  ret %v\n}\n"
        )
        fn = m.function("f")
        db = compute_nofree(build_call_graph(m), with_assumptions=True)
        assert insert_heap_checks(fn, db, infer_kinds(fn, m)) == []

    def test_loop_back_edge_reaches_earlier_access(self):
        m = parse_module(
            "module m\n"
            "extern @may_free\n"
            "fn f(%p: &i64:safe, %n: i64) {\n"
            "entry:\n  br loop\n"
            "loop:\n  %v = load i64, %p\n  call @may_free()\n  condbr %n, loop, exit\n"
            "exit:\n  ret\n}\n"
        )
        fn = m.function("f")
        sites = insert_heap_checks(fn, NofreeDb(), infer_kinds(fn, m))
        assert [s.anchor for s in sites] == ["v"]

    def test_raw_accesses_get_no_heap_check(self):
        m = parse_module(
            "module m\n"
            "extern @may_free\n"
            "fn f(%p: *i64:raw) -> i64 {\nentry:\n"
            "  call @may_free()\n  %v = load i64, %p\n  ret %v\n}\n"
        )
        fn = m.function("f")
        assert insert_heap_checks(fn, NofreeDb(), infer_kinds(fn, m)) == []

    def test_matches_path_oracle(self):
        for seed in range(300):
            rng = np.random.default_rng(seed)
            m = random_cfg_function(rng)
            fn = m.function("f")
            db = compute_nofree(build_call_graph(m), with_assumptions=True)
            km = infer_kinds(fn, m)
            anchors = {s.anchor for s in insert_heap_checks(fn, db, km)}
            assert anchors == oracle_heap_anchors(fn, db, km), f"seed {seed}"
