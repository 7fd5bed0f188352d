"""Static analyses: pointer-kind dataflow and the nofree call-graph analysis."""

from safeir.analysis.type_flow import (
    KindMap,
    TypeFlowError,
    derive_gep_kind,
    infer_kinds,
    is_safe_pointer,
)
from safeir.analysis.dealloc_graph import (
    CallGraph,
    NofreeDb,
    NofreeDbError,
    NofreeEntry,
    Verdict,
    access_size,
    build_call_graph,
    compile_units,
    compute_nofree,
    insert_heap_checks,
    load_nofree_db,
    save_nofree_db,
    unit_dependencies,
)

__all__ = [
    "CallGraph",
    "KindMap",
    "NofreeDb",
    "NofreeDbError",
    "NofreeEntry",
    "TypeFlowError",
    "Verdict",
    "access_size",
    "build_call_graph",
    "compile_units",
    "compute_nofree",
    "derive_gep_kind",
    "infer_kinds",
    "insert_heap_checks",
    "is_safe_pointer",
    "load_nofree_db",
    "save_nofree_db",
    "unit_dependencies",
]
