"""Brute-force oracles and seeded random inputs for property tests.

The oracles recompute what the analyses compute, by the most direct method
available: kind propagation in random order until nothing changes,
reachability of a deallocation in the call graph, and path enumeration in
the control-flow graph. Generators draw from ``numpy.random.Generator`` so a
seed reproduces a failing input.
"""

from __future__ import annotations

import copy
import itertools

import networkx as nx
import numpy as np

from ..analysis.dealloc_graph import (
    CallGraph,
    NofreeDb,
    Verdict,
    access_size,
)
from ..analysis.type_flow import KindMap
from ..ir.abi import default_decl_kind
from ..ir.instructions import Instruction, Opcode
from ..ir.module import ExternalDecl, FunctionDef, ProgramModule
from ..ir.types import PtrKind, pointee_of
from ..ir.validate import block_graph
from ..parsers import parse_module

# ============================================================================
# Pointer kinds
# ============================================================================

_S, _R, _N, _X = PtrKind.SAFE, PtrKind.RAW, PtrKind.NOPTR, PtrKind.NONPOINTER

_MEET_TABLE = {
    (_S, _S): _S, (_S, _R): _R, (_S, _N): _S, (_S, _X): _R,
    (_R, _R): _R, (_R, _N): _R, (_R, _X): _R,
    (_N, _N): _N, (_N, _X): _R,
    (_X, _X): _X,
}


def table_meet(a: PtrKind, b: PtrKind) -> PtrKind:
    return _MEET_TABLE.get((a, b)) or _MEET_TABLE[(b, a)]


def _gep_kind(base: PtrKind, base_shape, inst: Instruction) -> PtrKind:
    if base not in (_S, _N) or len(inst.operands) > 1:
        return _R
    pointee = pointee_of(base_shape) if base_shape is not None else None
    target = pointee_of(inst.shape) if inst.shape is not None else None
    if pointee is None:
        return _R
    width = max(target.byte_size, 1) if target is not None else 1
    if inst.offset < 0 or inst.offset + width > pointee.byte_size:
        return _R
    return base


def oracle_kinds(
    fn: FunctionDef, module: ProgramModule | None = None, rng: np.random.Generator | None = None
) -> dict[str, PtrKind]:
    """Kinds by chaotic iteration in a random instruction order."""
    rng = rng or np.random.default_rng(0)
    foreign = fn.is_foreign
    shapes = fn.value_shapes()
    kinds: dict[str, PtrKind | None] = {}
    for param in fn.params:
        kinds[param.name] = _R if foreign and param.kind is not _X else param.kind
    derived = []
    for _, _, inst in fn.instructions(include_checks=False):
        if inst.result is None:
            continue
        kinds[inst.result] = default_decl_kind(inst, module, foreign=foreign)
        if inst.opcode in (Opcode.BITCAST, Opcode.GEP, Opcode.PHI):
            derived.append(inst)

    while True:
        changed = False
        for i in rng.permutation(len(derived)):
            inst = derived[int(i)]
            if inst.opcode is Opcode.BITCAST:
                new = kinds[inst.operands[0]]
            elif inst.opcode is Opcode.GEP:
                base = kinds[inst.operands[0]]
                new = None if base is None else _gep_kind(base, shapes[inst.operands[0]], inst)
            else:
                inputs = [kinds[v] for _, v in inst.incoming if kinds[v] is not None]
                new = None
                for k in inputs:
                    new = k if new is None else table_meet(new, k)
            if new is None:
                continue
            if foreign and new is not _X:
                new = _R
            old = kinds[inst.result]
            merged = new if old is None else table_meet(old, new)
            if merged != old:
                kinds[inst.result] = merged
                changed = True
        if not changed:
            return kinds


# ============================================================================
# Nofree
# ============================================================================


def _frees_locally(attrs: dict, name: str, db: NofreeDb) -> bool:
    if attrs["known_dealloc"]:
        return True
    if attrs["defined"]:
        return attrs["frees_directly"] or attrs["has_indirect_call"] or attrs["has_unknown_callee"]
    known = db.get(name)
    if known is not None:
        return known is Verdict.MAYFREE
    return not attrs["nofree_declared"]


def oracle_nofree(g: CallGraph, db: NofreeDb | None = None) -> dict[str, Verdict]:
    """MAYFREE iff some node reachable from the function (itself included) frees."""
    db = db or NofreeDb()
    graph = g.graph
    sources = {n for n, attrs in graph.nodes(data=True) if _frees_locally(attrs, n, db)}
    result = {}
    for name, attrs in graph.nodes(data=True):
        if not (attrs["defined"] or attrs["known_dealloc"]):
            continue
        reach = nx.descendants(graph, name) | {name}
        result[name] = Verdict.MAYFREE if reach & sources else Verdict.NOFREE
    return result


# ============================================================================
# Heap checks
# ============================================================================


def oracle_heap_anchors(fn: FunctionDef, db: NofreeDb, km: KindMap) -> set[str]:
    """Anchors of safe accesses with a path from a deallocation point."""
    graph = block_graph(fn)
    shapes = fn.value_shapes()
    frees, accesses = [], []
    for block in fn.blocks:
        body = [inst for inst in block.instructions if not inst.is_check]
        for pos, inst in enumerate(body):
            frees_here = inst.opcode is Opcode.HEAPFREE or (
                inst.opcode is Opcode.CALL
                and (inst.callee is None or not db.is_nofree(inst.callee))
            )
            if frees_here:
                frees.append((block.label, pos))
            elif (inst.is_memory_access and km[inst.address] is PtrKind.SAFE
                  and access_size(inst, shapes) > 0):
                accesses.append((block.label, pos, inst))

    def path_exists(src: str, dst: str) -> bool:
        for succ in graph.successors(src):
            if succ == dst:
                return True
            if next(itertools.islice(nx.all_simple_paths(graph, succ, dst), 1), None):
                return True
        return False

    anchors = set()
    for label, pos, inst in accesses:
        for free_label, free_pos in frees:
            if (free_label == label and free_pos < pos) or path_exists(free_label, label):
                anchors.add(inst.uid)
                break
    return anchors


# ============================================================================
# Units
# ============================================================================


def split_module(m: ProgramModule, unit_functions: set[str], name: str) -> ProgramModule:
    """Unit of ``m`` defining only ``unit_functions``; other bodies become externals.

    Declarations (deallocators, runtime allocators) are kept in every unit.
    """
    unit = ProgramModule(name, globals=copy.deepcopy(m.globals),
                         externals=copy.deepcopy(m.externals))
    called = set()
    for fn in m.functions:
        if fn.is_declaration or fn.name in unit_functions:
            unit.functions.append(copy.deepcopy(fn))
            for _, _, inst in fn.instructions(include_checks=False):
                if inst.opcode in (Opcode.CALL, Opcode.GLOBALADDR) and inst.callee:
                    called.add(inst.callee)
    for fn in m.functions:
        if fn.name in called and unit.function(fn.name) is None and unit.external(fn.name) is None:
            unit.externals.append(ExternalDecl(fn.name))
    return unit


# ============================================================================
# Random inputs
# ============================================================================


def random_call_graph(
    rng: np.random.Generator, max_nodes: int = 200, min_nodes: int = 1
) -> tuple[CallGraph, NofreeDb]:
    """A call graph with cycles, flags and externals, plus a DB for some externals."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    defined = [f"f{i}" for i in range(n)]
    externals = [f"x{i}" for i in range(int(rng.integers(0, n // 10 + 2)))]
    deallocators = ["free"] if rng.random() < 0.7 else []
    targets = defined + externals + deallocators

    edges = set()
    for _ in range(int(1.5 * n)):
        caller = defined[int(rng.integers(n))]
        callee = targets[int(rng.integers(len(targets)))]
        edges.add((caller, callee))

    def pick(p: float) -> list[str]:
        return [name for name in defined if rng.random() < p]

    nofree_externals = [x for x in externals if rng.random() < 0.5]
    g = CallGraph.from_edges(
        defined,
        sorted(edges),
        frees=pick(0.03),
        unknown=pick(0.02),
        indirect=pick(0.02),
        deallocators=deallocators,
        nofree_externals=nofree_externals,
        unit="random",
    )
    for x in externals:
        if x not in g.graph:
            g.add_function(x, defined=False, nofree_declared=x in nofree_externals)

    db = NofreeDb()
    for x in externals:
        roll = rng.random()
        if roll < 0.25:
            db.record(x, Verdict.NOFREE, "dep")
        elif roll < 0.4:
            db.record(x, Verdict.MAYFREE, "dep")
    return g, db


def random_cfg_function(rng: np.random.Generator, max_blocks: int = 12) -> ProgramModule:
    """Module with one function ``f`` over a random CFG of loads, stores and calls.

    ``%p`` is a safe pointer; ``@may_free`` has no nofree promise while
    ``@no_free`` does.
    """
    n = int(rng.integers(1, max_blocks + 1))
    lines = [
        "module cfg",
        "extern @may_free",
        "extern @no_free nofree",
        "fn f(%p: &{i64, i64}:safe, %flag: i64) {",
    ]
    counter = itertools.count()
    for b in range(n):
        lines.append(f"b{b}:")
        for _ in range(int(rng.integers(0, 4))):
            roll = rng.random()
            if roll < 0.35:
                lines.append(f"  %v{next(counter)} = load i64, %p")
            elif roll < 0.5:
                lines.append("  store %p, %flag")
            elif roll < 0.8:
                lines.append("  call @may_free()")
            else:
                lines.append("  call @no_free()")
        if b == n - 1 or rng.random() < 0.15:
            lines.append("  ret")
        elif rng.random() < 0.5:
            lines.append(f"  br b{int(rng.integers(n))}")
        else:
            lines.append(f"  condbr %flag, b{int(rng.integers(n))}, b{int(rng.integers(n))}")
    lines.append("}")
    return parse_module("\n".join(lines) + "\n", filename="cfg.sir")


def random_program(rng: np.random.Generator, max_instructions: int = 50) -> ProgramModule:
    """Module with one function ``f`` mixing pointer derivations and a loop of phis.

    castsafe is only applied to raw values (heap allocations and the raw
    parameter), so the module always validates.
    """
    body: list[str] = []
    # (name, shape) of pointer values
    pointers: list[tuple[str, str]] = [("a", "&{i64, i64}"), ("r", "*{i64, i64}")]
    castable = ["r"]
    counter = itertools.count()

    def fresh(prefix: str = "v") -> str:
        return f"{prefix}{next(counter)}"

    budget = int(rng.integers(1, max(2, max_instructions - 14)))
    while len(body) < budget:
        roll = rng.random()
        if roll < 0.12:
            v = fresh()
            body.append(f"%{v} = alloca {{i64, i64}}")
            pointers.append((v, "&{i64, i64}"))
        elif roll < 0.22:
            size, mem, obj = fresh("sz"), fresh("m"), fresh()
            body += [f"%{size} = const i64 16", f"%{mem} = heapalloc %{size}",
                     f"%{obj} = bitcast %{mem} to *{{i64, i64}}"]
            pointers.append((obj, "*{i64, i64}"))
            castable.append(obj)
        elif roll < 0.32:
            source = castable[int(rng.integers(len(castable)))]
            v = fresh()
            body.append(f"%{v} = castsafe %{source} to &{{i64, i64}}")
            pointers.append((v, "&{i64, i64}"))
        elif roll < 0.55:
            base, shape = pointers[int(rng.integers(len(pointers)))]
            v = fresh()
            offset = int(rng.choice([0, 8, 16, 24]))
            target = f"{shape[0]}i64"
            body.append(f"%{v} = gep %{base}, {offset} -> {target}")
            pointers.append((v, target))
        elif roll < 0.62:
            base, shape = pointers[int(rng.integers(len(pointers)))]
            idx, v = fresh("i"), fresh()
            body += [f"%{idx} = const i64 8", f"%{v} = gep %{base}, %{idx} -> *i64"]
            pointers.append((v, "*i64"))
        elif roll < 0.75:
            base, shape = pointers[int(rng.integers(len(pointers)))]
            v = fresh()
            target = "&{i64, i64}" if rng.random() < 0.5 else "*{i64, i64}"
            body.append(f"%{v} = bitcast %{base} to {target}")
            pointers.append((v, target))
        elif roll < 0.88:
            base, _ = pointers[int(rng.integers(len(pointers)))]
            v = fresh()
            loaded = ["i64", "&i64", "*i64"][int(rng.integers(3))]
            body.append(f"%{v} = load {loaded}, %{base}")
            if loaded != "i64":
                pointers.append((v, loaded))
        else:
            base, _ = pointers[int(rng.integers(len(pointers)))]
            i, v = fresh("i"), fresh()
            body += [f"%{i} = ptrtoint %{base}", f"%{v} = inttoptr %{i} to *i64"]
            pointers.append((v, "*i64"))

    # loop with phis over pointers of the entry block
    loop: list[str] = []
    for _ in range(int(rng.integers(1, 4))):
        start, shape = pointers[int(rng.integers(len(pointers)))]
        phi, step = fresh("phi"), fresh("c")
        loop.append(f"%{phi} = phi {shape} [entry: %{start}], [loop: %{step}]")
        loop.append(f"%{step} = bitcast %{phi} to {shape}")
    cond = fresh("cond")
    loop += [f"%{cond} = cmp eq %n, %n", f"condbr %{cond}, exit, loop"]

    lines = ["module random",
             "fn f(%a: &{i64, i64}:safe, %r: *{i64, i64}:raw, %n: i64) -> i64 {",
             "entry:"]
    lines += [f"  {line}" for line in body + ["br loop"]]
    lines.append("loop:")
    phis = [line for line in loop if " = phi " in line]
    rest = [line for line in loop if " = phi " not in line]
    lines += [f"  {line}" for line in phis + rest]
    lines += ["exit:", "  %rc = const i64 0", "  ret %rc", "}"]
    return parse_module("\n".join(lines) + "\n", filename="random.sir")
