"""Call-graph nofree analysis and heap-check insertion.

A function is NOFREE when no execution of it can reach a heap deallocation.
Verdicts are computed bottom-up over the strongly connected components of
the call graph and persisted in a NofreeDb so later compilation units can
reuse them for functions they only see as externals.

Design decisions:
- Whole SCCs share one verdict: if any member may free, every member may.
- Calls through function pointers and calls to names nobody declared are
  MAYFREE.
- A function that executes ``heapfree`` itself is MAYFREE.
- External functions without a DB entry are MAYFREE unless declared nofree.
- Merging two DBs never upgrades MAYFREE to NOFREE.
- insert_heap_checks scans every deallocation point of the function and asks
  whether a safe dereference is reachable from it (block graph including
  back-edges, instruction order inside a block).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import networkx as nx

from ..constants import ALLOCATOR_NAMES, DEALLOCATOR_NAMES, SQLITE_SUFFIXES
from ..exceptions import SafeIRError
from ..ir.checks import CheckKind, CheckSite
from ..ir.instructions import Instruction, Opcode
from ..ir.module import FnAttr, FunctionDef, ProgramModule
from ..ir.types import PtrKind
from ..ir.validate import block_graph
from .type_flow import KindMap

logger = logging.getLogger(__name__)


class NofreeDbError(SafeIRError):
    """Raised when a persisted nofree database cannot be read."""

    def __init__(self, message: str, path: Path | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{where}{message}")


class Verdict(Enum):
    NOFREE = "NOFREE"
    MAYFREE = "MAYFREE"


# ============================================================================
# NofreeDb
# ============================================================================


@dataclass(frozen=True)
class NofreeEntry:
    verdict: Verdict
    unit: str = ""


@dataclass
class NofreeDb:
    """Function name -> verdict, with the unit that produced each entry."""

    entries: dict[str, NofreeEntry] = field(default_factory=dict)

    def get(self, name: str) -> Verdict | None:
        entry = self.entries.get(name)
        return entry.verdict if entry is not None else None

    def verdict(self, name: str) -> Verdict:
        """Verdict for ``name``; unknown names are MAYFREE."""
        return self.get(name) or Verdict.MAYFREE

    def is_nofree(self, name: str) -> bool:
        return self.verdict(name) is Verdict.NOFREE

    def record(self, name: str, verdict: Verdict, unit: str = "") -> None:
        """Add or update an entry.

        A MAYFREE from another unit is never upgraded. A unit's verdict does
        replace its own earlier one and any entry without a unit.
        """
        current = self.entries.get(name)
        if (current is not None and current.verdict is Verdict.MAYFREE
                and verdict is Verdict.NOFREE
                and (not unit or current.unit not in ("", unit))):
            return
        self.entries[name] = NofreeEntry(verdict, unit)

    def merge(self, other: "NofreeDb") -> "NofreeDb":
        """Union of both DBs, MAYFREE winning on conflict."""
        merged = NofreeDb(dict(self.entries))
        for name, entry in other.entries.items():
            merged.record(name, entry.verdict, entry.unit)
        return merged

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def items(self):
        return sorted(self.entries.items())

    def to_dict(self) -> dict:
        return {name: {"verdict": e.verdict.value, "unit": e.unit} for name, e in self.items()}


def save_nofree_db(db: NofreeDb, path: Path | str) -> None:
    """Write ``db`` to ``path``.

    TSV (``name<TAB>NOFREE|MAYFREE<TAB>unit`` per line, sorted by name) unless
    the suffix names a SQLite database, in which case the store's contents are
    replaced by ``db``.
    """
    path = Path(path)
    if path.suffix in SQLITE_SUFFIXES:
        from ..utils.db_helpers import AnnotationStore

        AnnotationStore(path).replace_nofree_db(db)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{name}\t{entry.verdict.value}\t{entry.unit}\n" for name, entry in db.items()]
    path.write_text("".join(lines), encoding="utf-8")
    logger.info("wrote %d nofree entries to %s", len(db), path)


def load_nofree_db(path: Path | str) -> NofreeDb:
    """Read a DB written by save_nofree_db.

    Blank lines and ``#`` comments are skipped.

    Raises:
        NofreeDbError: On a malformed line (carries path and line number).
    """
    path = Path(path)
    if path.suffix in SQLITE_SUFFIXES:
        from ..utils.db_helpers import AnnotationStore

        return AnnotationStore(path).load_nofree_db()

    db = NofreeDb()
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise NofreeDbError(f"cannot read nofree db: {e}", path) from e
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 3 or not parts[0]:
            raise NofreeDbError("expected 'name<TAB>verdict<TAB>unit'", path, lineno)
        name, verdict, unit = parts
        try:
            db.record(name, Verdict(verdict.strip()), unit.strip())
        except ValueError:
            raise NofreeDbError(f"unknown verdict '{verdict}'", path, lineno) from None
    return db


# ============================================================================
# Call graph
# ============================================================================

_FLAGS = ("has_unknown_callee", "has_indirect_call", "frees_directly")


class CallGraph:
    """Caller -> callee graph with per-node facts.

    Node attributes:
        defined: the function has a body in the analysed unit.
        known_dealloc: the function is a deallocator.
        nofree_declared: the declaration carries a nofree promise.
        has_unknown_callee / has_indirect_call / frees_directly: see module doc.
    """

    def __init__(self, unit: str = ""):
        self.unit = unit
        self.graph = nx.DiGraph()

    def add_function(self, name: str, *, defined: bool, known_dealloc: bool = False,
                     nofree_declared: bool = False) -> None:
        self.graph.add_node(
            name,
            defined=defined,
            known_dealloc=known_dealloc,
            nofree_declared=nofree_declared,
            has_unknown_callee=False,
            has_indirect_call=False,
            frees_directly=False,
        )

    def add_call(self, caller: str, callee: str) -> None:
        if callee not in self.graph:
            self.add_function(callee, defined=False)
        self.graph.add_edge(caller, callee)

    def set_flag(self, name: str, flag: str) -> None:
        if flag not in _FLAGS:
            raise ValueError(f"unknown call graph flag '{flag}'")
        self.graph.nodes[name][flag] = True

    def flags(self, name: str) -> dict:
        return dict(self.graph.nodes[name])

    def callees(self, name: str) -> list[str]:
        return sorted(self.graph.successors(name))

    @property
    def nodes(self) -> list[str]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted(self.graph.edges)

    def defined_functions(self) -> list[str]:
        return sorted(n for n, d in self.graph.nodes(data=True) if d["defined"])

    @classmethod
    def from_edges(
        cls,
        defined: Iterable[str],
        edges: Iterable[tuple[str, str]],
        *,
        frees: Iterable[str] = (),
        unknown: Iterable[str] = (),
        indirect: Iterable[str] = (),
        deallocators: Iterable[str] = (),
        nofree_externals: Iterable[str] = (),
        unit: str = "",
    ) -> "CallGraph":
        """Build a graph directly, without a module."""
        g = cls(unit)
        for name in defined:
            g.add_function(name, defined=True)
        for name in deallocators:
            g.add_function(name, defined=False, known_dealloc=True)
        for name in nofree_externals:
            g.add_function(name, defined=False, nofree_declared=True)
        for caller, callee in edges:
            g.add_call(caller, callee)
        for name in frees:
            g.set_flag(name, "frees_directly")
        for name in unknown:
            g.set_flag(name, "has_unknown_callee")
        for name in indirect:
            g.set_flag(name, "has_indirect_call")
        return g

    def __repr__(self) -> str:
        return f"<CallGraph(unit='{self.unit}', nodes={self.graph.number_of_nodes()})>"


def build_call_graph(m: ProgramModule) -> CallGraph:
    """Call graph of every call in ``m``.

    Functions with bodies are ``defined``; declarations and externals are
    leaves whose verdict comes from attributes or the NofreeDb. Allocator
    declarations count as declared nofree.
    """
    g = CallGraph(m.name)
    for fn in m.functions:
        g.add_function(
            fn.name,
            defined=not fn.is_declaration,
            known_dealloc=(
                fn.is_known_dealloc or (fn.is_declaration and fn.name in DEALLOCATOR_NAMES)
            ),
            nofree_declared=(
                FnAttr.NOFREE_DECLARED in fn.attributes
                or (fn.is_declaration and fn.name in ALLOCATOR_NAMES)
            ),
        )
    for ext in m.externals:
        if ext.name not in g.graph:
            g.add_function(ext.name, defined=False, known_dealloc=ext.name in DEALLOCATOR_NAMES,
                           nofree_declared=ext.nofree or ext.name in ALLOCATOR_NAMES)

    for fn in m.defined_functions():
        for _, _, inst in fn.instructions(include_checks=False):
            if inst.opcode is Opcode.HEAPFREE:
                g.set_flag(fn.name, "frees_directly")
            elif inst.opcode is Opcode.CALL:
                if inst.callee is None:
                    g.set_flag(fn.name, "has_indirect_call")
                elif m.resolves(inst.callee):
                    g.add_call(fn.name, inst.callee)
                else:
                    g.set_flag(fn.name, "has_unknown_callee")
    return g


def _leaf_verdict(attrs: dict, name: str, db: NofreeDb) -> Verdict:
    if attrs["known_dealloc"]:
        return Verdict.MAYFREE
    known = db.get(name)
    if known is not None:
        return known
    return Verdict.NOFREE if attrs["nofree_declared"] else Verdict.MAYFREE


def compute_nofree(
    g: CallGraph, db: NofreeDb | None = None, *, with_assumptions: bool = False
) -> NofreeDb:
    """Nofree verdicts for every function defined in the graph's unit.

    Args:
        g: Call graph of the unit.
        db: Verdicts from previously analysed units. Names missing from it
            are MAYFREE unless declared nofree.
        with_assumptions: Also record the verdicts assumed for called
            externals ``db`` does not cover, with an empty unit. Only for a
            view used inside the unit; such a DB must not be saved.

    Returns:
        ``db`` merged with the verdicts of the unit's defined functions and
        deallocators.
    """
    db = db or NofreeDb()
    graph = g.graph
    verdicts: dict[str, Verdict] = {}

    condensed = nx.condensation(graph)
    for scc_id in reversed(list(nx.topological_sort(condensed))):
        members = condensed.nodes[scc_id]["members"]
        defined = [n for n in members if graph.nodes[n]["defined"]]
        if not defined:
            for name in members:
                verdicts[name] = _leaf_verdict(graph.nodes[name], name, db)
            continue

        mayfree = False
        for name in members:
            attrs = graph.nodes[name]
            if attrs["known_dealloc"] or any(attrs[flag] for flag in _FLAGS):
                mayfree = True
                break
            for callee in graph.successors(name):
                if callee in members:
                    continue
                if verdicts[callee] is Verdict.MAYFREE:
                    mayfree = True
                    break
            if mayfree:
                break

        verdict = Verdict.MAYFREE if mayfree else Verdict.NOFREE
        for name in members:
            verdicts[name] = verdict
        if len(members) > 1:
            logger.debug("SCC %s -> %s", sorted(members), verdict.value)

    result = NofreeDb()
    for name, attrs in graph.nodes(data=True):
        if attrs["defined"] and attrs["nofree_declared"] and verdicts[name] is Verdict.MAYFREE:
            logger.warning("%s is declared nofree but may free", name)
        if attrs["defined"] or attrs["known_dealloc"]:
            result.record(name, verdicts[name], g.unit)
        elif with_assumptions and name not in db and graph.in_degree(name) > 0:
            result.record(name, verdicts[name], "")
    return db.merge(result)


# ============================================================================
# Heap checks
# ============================================================================


def _may_free(inst: Instruction, db: NofreeDb) -> bool:
    if inst.opcode is Opcode.HEAPFREE:
        return True
    if inst.opcode is not Opcode.CALL:
        return False
    if inst.callee is None:
        return True
    return not db.is_nofree(inst.callee)


def _reach_after(graph: nx.DiGraph) -> dict[str, set[str]]:
    """Blocks reachable from each block by a path of at least one edge."""
    reach = {}
    for label in graph.nodes:
        blocks: set[str] = set()
        for succ in graph.successors(label):
            blocks.add(succ)
            blocks |= nx.descendants(graph, succ)
        reach[label] = blocks
    return reach


def access_size(inst: Instruction, shapes: dict) -> int:
    """Bytes touched by a load or store."""
    if inst.opcode is Opcode.LOAD:
        return inst.shape.byte_size
    data_shape = shapes.get(inst.operands[1])
    return data_shape.byte_size if data_shape is not None else 0


def insert_heap_checks(fn: FunctionDef, db: NofreeDb, km: KindMap) -> list[CheckSite]:
    """HEAP check sites for safe dereferences that may follow a deallocation.

    Args:
        fn: Function after elision.
        db: Nofree verdicts covering the function's callees.
        km: Kinds of ``fn``.

    Returns:
        At most one HEAP site per load/store whose address is SAFE and which
        is reachable from a call that may free (or a heapfree), in layout
        order.
    """
    if fn.is_declaration:
        return []
    graph = block_graph(fn)
    reach = _reach_after(graph)
    shapes = fn.value_shapes()

    free_points: list[tuple[str, int]] = []
    memory: list[tuple[str, int, Instruction]] = []
    for block in fn.blocks:
        position = 0
        for inst in block.instructions:
            if inst.is_check:
                continue
            if _may_free(inst, db):
                free_points.append((block.label, position))
            elif inst.is_memory_access and km[inst.address] is PtrKind.SAFE:
                memory.append((block.label, position, inst))
            position += 1

    sites = []
    for label, position, inst in memory:
        reached = any(
            (free_label == label and free_pos < position) or label in reach[free_label]
            for free_label, free_pos in free_points
        )
        size = access_size(inst, shapes)
        if reached and size > 0:
            sites.append(CheckSite(CheckKind.HEAP, inst.uid, inst.address, size))
    if sites:
        logger.debug("%s: %d heap checks", fn.name, len(sites))
    return sites



# ============================================================================
# Compilation units
# ============================================================================


def unit_dependencies(units: list[ProgramModule]) -> nx.DiGraph:
    """Unit -> unit edges for every call into a function another unit defines."""
    owner = {fn.name: u.name for u in units for fn in u.defined_functions()}
    graph = nx.DiGraph()
    graph.add_nodes_from(u.name for u in units)
    for u in units:
        for fn in u.defined_functions():
            for _, _, inst in fn.instructions(include_checks=False):
                if inst.opcode is Opcode.CALL and inst.callee is not None:
                    target = owner.get(inst.callee)
                    if target is not None and target != u.name:
                        graph.add_edge(u.name, target)
    return graph


def compile_units(units: list[ProgramModule], db: NofreeDb | None = None) -> NofreeDb:
    """Analyse units dependencies-first, threading the NofreeDb between them.

    Args:
        units: Compilation units; a function defined in one unit is an
            external of the others.
        db: Verdicts of previously built dependencies.

    Returns:
        The DB after the last unit.

    Raises:
        NofreeDbError: If two units call into each other.
    """
    graph = unit_dependencies(units)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = [edge[0] for edge in nx.find_cycle(graph)]
        raise NofreeDbError(f"units depend on each other: {' -> '.join(cycle)}")
    by_name = {u.name: u for u in units}
    db = db or NofreeDb()
    for name in reversed(list(nx.lexicographical_topological_sort(graph))):
        db = compute_nofree(build_call_graph(by_name[name]), db)
        logger.debug("unit %s analysed, %d entries", name, len(db))
    return db
