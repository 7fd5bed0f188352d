"""Systematic FFI test corpus.

Each case allocates one ``{i64, i64}`` object at an allocation site, hands a
raw pointer to it across the language boundary, optionally invalidates it,
casts it to a safe pointer and dereferences the result.

Dimensions:
    allocation site   GLOBAL, C_STACK, C_HEAP, RUST_STACK, RUST_HEAP
    deallocation site the site whose deallocator releases the object
    invalidation      NONE, ARITHMETIC_OOB, CRAFTED_PTR, DEALLOC
    permutation       where the invalidation sits relative to the cast

Design decisions:
- Programs are rendered from text templates and parsed, so every case is a
  plain ``.sir`` file and generation is byte-for-byte deterministic.
- The feasibility matrix is spelled out in _feasible_dealloc_cases with one
  comment per excluded combination.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ..constants import SIR_SUFFIX
from ..ir.module import ProgramModule
from ..parsers import parse_module
from ..runtime import Verdict

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

OBJ = "{i64, i64}"
RAW = "*{i64, i64}"
SAFE = "&{i64, i64}"
CRAFT_MASK = (1 << 56) - 1


class Site(Enum):
    GLOBAL = "global"
    C_STACK = "c_stack"
    C_HEAP = "c_heap"
    RUST_STACK = "rust_stack"
    RUST_HEAP = "rust_heap"


class Invalidation(Enum):
    NONE = "none"
    ARITHMETIC_OOB = "oob"
    CRAFTED_PTR = "craft"
    DEALLOC = "dealloc"


HEAP_SITES = (Site.C_HEAP, Site.RUST_HEAP)


@dataclass
class CorpusCase:
    """One generated program and what running it must produce."""

    id: str
    alloc_site: Site
    dealloc_site: Site | None
    invalidation: Invalidation
    permutation: int
    text: str
    program: ProgramModule
    expected: Verdict
    free_during_scope: bool = False
    invalidation_before_cast: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "alloc_site": self.alloc_site.value,
            "dealloc_site": self.dealloc_site.value if self.dealloc_site else None,
            "invalidation": self.invalidation.value,
            "permutation": self.permutation,
            "expected": self.expected.value,
            "free_during_scope": self.free_during_scope,
            "invalidation_before_cast": self.invalidation_before_cast,
            "instructions": self.program.instruction_count(),
        }


# ============================================================================
# Templates
# ============================================================================

_C_ALLOC = f"""fn c_alloc() -> {RAW}:raw foreign {{
entry:
  %size = const i64 16
  %mem = heapalloc %size
  %obj = bitcast %mem to {RAW}
  ret %obj
}}"""

_C_FREE = f"""fn c_free(%p: {RAW}:raw) foreign {{
entry:
  heapfree %p
  ret
}}"""

_RUST_ALLOC = "fn __rust_alloc(%size: i64) -> *i8:raw nofree"

_RUST_DEALLOC = "fn __rust_dealloc(%p: *i8:raw) known_dealloc"

_C_IDENTITY = f"""fn c_identity(%p: {RAW}:raw) -> {RAW}:raw foreign {{
entry:
  ret %p
}}"""

_C_WITH_LOCAL = f"""fn c_with_local(%cb: fn) foreign {{
entry:
  %l = alloca {OBJ}
  %p = bitcast %l to {RAW}
  call %cb(%p)
  ret
}}"""

_USE_OBJ = f"""fn use_obj(%o: {SAFE}:safe) extern_visible {{
entry:
  %f = gep %o, 8 -> &i64
  %v = load i64, %f
  ret
}}"""

_C_CRAFT = f"""fn c_craft(%p: {RAW}:raw) -> {RAW}:raw foreign {{
entry:
  %a = ptrtoint %p
  %m = const i64 {CRAFT_MASK}
  %b = and i64 %a, %m
  %q = inttoptr %b to {RAW}
  ret %q
}}"""

_MAKE_DANGLING = f"""fn make_dangling() -> {RAW}:raw {{
entry:
  %l = alloca {OBJ}
  %r = bitcast %l to {RAW}
  ret %r
}}"""

_C_LOCAL = f"""fn c_local() -> {RAW}:raw foreign {{
entry:
  %l = alloca {OBJ}
  %r = bitcast %l to {RAW}
  ret %r
}}"""

_DERIVE = f"""fn derive() -> {SAFE}:safe {{
entry:
  %l = alloca {OBJ}
  %p = call {RAW} @c_identity(%l)
  %s = castsafe %p to {SAFE}
  ret %s
}}"""


class _Builder:
    """Accumulates the pieces of one case program."""

    def __init__(self, name: str):
        self.name = name
        self.globals: list[str] = []
        self.helpers: dict[str, str] = {}
        self.host = "main"
        self.main: list[str] = []
        self.body: list[str] = []

    def helper(self, name: str, text: str):
        self.helpers.setdefault(name, text)

    def emit(self, *lines: str):
        self.body.extend(lines)

    def render(self) -> str:
        out = [f"module {self.name}", ""]
        out.extend(self.globals)
        if self.globals:
            out.append("")
        if self.host == "main":
            out.append("fn main() -> i64 {")
            out.append("entry:")
            out.extend(_indent(self.body + ["%rc = const i64 0", "ret %rc"]))
            out.append("}")
        else:
            out.append("fn main() -> i64 {")
            out.append("entry:")
            out.extend(_indent(self.main + ["%rc = const i64 0", "ret %rc"]))
            out.append("}")
            out.append("")
            out.append(f"fn rust_cb(%raw: {RAW}:raw) extern_visible {{")
            out.append("entry:")
            out.extend(_indent(self.body + ["ret"]))
            out.append("}")
        for text in self.helpers.values():
            out.append("")
            out.append(text)
        return "\n".join(out) + "\n"


def _indent(lines: list[str]) -> list[str]:
    return [line if line.endswith(":") else f"  {line}" for line in lines]


# ----------------------------------------------------------------------------
# Allocation, initialisation and deallocation
# ----------------------------------------------------------------------------


def _allocate(b: _Builder, site: Site):
    """Emit code leaving a raw pointer to the object in %raw."""
    if site is Site.GLOBAL:
        b.globals.append(f"global @obj: {OBJ}:raw = 40")
        b.emit(f"%raw = globaladdr {RAW} @obj")
    elif site is Site.C_HEAP:
        b.helper("c_alloc", _C_ALLOC)
        b.emit(f"%raw = call {RAW} @c_alloc()")
    elif site is Site.RUST_HEAP:
        b.helper("__rust_alloc", _RUST_ALLOC)
        b.emit("%size = const i64 16",
               "%mem = call *i8 @__rust_alloc(%size)",
               f"%raw = bitcast %mem to {RAW}")
    elif site is Site.RUST_STACK:
        b.helper("c_identity", _C_IDENTITY)
        b.emit(f"%local = alloca {OBJ}", f"%raw = call {RAW} @c_identity(%local)")
    elif site is Site.C_STACK:
        # the object lives in a foreign frame that calls back into safe code
        b.host = "rust_cb"
        b.helper("c_with_local", _C_WITH_LOCAL)
        b.main.extend(["%cb = globaladdr fn @rust_cb", "call @c_with_local(%cb)"])
    b.emit("%f0 = gep %raw, 0 -> *i64", "%v0 = const i64 40", "store %f0, %v0")


def _free_lines(b: _Builder, site: Site, value: str) -> list[str]:
    if site is Site.C_HEAP:
        b.helper("c_free", _C_FREE)
        return [f"call @c_free(%{value})"]
    b.helper("__rust_dealloc", _RUST_DEALLOC)
    return [f"%{value}_bytes = bitcast %{value} to *i8", f"call @__rust_dealloc(%{value}_bytes)"]


def _natural_free(b: _Builder, site: Site):
    if site in HEAP_SITES:
        b.emit(*_free_lines(b, site, "raw"))


def _cast_and_read(b: _Builder, source: str = "raw", offset: int = 8):
    b.emit(f"%s = castsafe %{source} to {SAFE}",
           f"%fb = gep %s, {offset} -> &i64",
           "%vb = load i64, %fb")


# ----------------------------------------------------------------------------
# Case bodies
# ----------------------------------------------------------------------------


def _benign(b: _Builder, site: Site, permutation: int):
    _allocate(b, site)
    if permutation == 0:
        _cast_and_read(b)
    else:
        b.helper("use_obj", _USE_OBJ)
        b.emit("%fa = gep %raw, 0 -> *i64",
               "%va = load i64, %fa",
               f"%s = castsafe %raw to {SAFE}",
               "call @use_obj(%s)")
    _natural_free(b, site)


def _out_of_bounds(b: _Builder, site: Site, permutation: int):
    _allocate(b, site)
    if permutation == 0:
        b.emit(f"%oob = gep %raw, 16 -> {RAW}")
        _cast_and_read(b, "oob", 0)
    else:
        b.emit(f"%s = castsafe %raw to {SAFE}",
               "%off = const i64 16",
               "%fx = gep %s, %off -> &i64",
               "%vx = load i64, %fx")
    _natural_free(b, site)


def _crafted(b: _Builder, site: Site, permutation: int):
    _allocate(b, site)
    if permutation == 0:
        b.helper("c_craft", _C_CRAFT)
        b.emit(f"%c = call {RAW} @c_craft(%raw)")
        _cast_and_read(b, "c")
    else:
        b.emit(f"%s = castsafe %raw to {SAFE}",
               "%a = ptrtoint %s",
               f"%m = const i64 {CRAFT_MASK}",
               "%b = and i64 %a, %m",
               "%q = inttoptr %b to *i64",
               "%vq = load i64, %q")
    _natural_free(b, site)


def _release_helper(b: _Builder, dealloc: Site) -> str:
    free = _free_lines(b, dealloc, "p")
    lines = [
        f"fn release(%p: {RAW}:raw, %i: i64) {{",
        "entry:",
        "  %z = const i64 0",
        "  %first = cmp eq %i, %z",
        "  condbr %first, free, done",
        "free:",
        *(f"  {line}" for line in free),
        "  br done",
        "done:",
        "  ret",
        "}",
    ]
    return "\n".join(lines)


def _heap_dealloc(b: _Builder, alloc: Site, dealloc: Site, permutation: int):
    _allocate(b, alloc)
    if permutation == 0:
        # free before scope
        b.emit(*_free_lines(b, dealloc, "raw"))
        _cast_and_read(b)
    elif permutation == 1:
        # free during scope, straight line
        b.emit(f"%s = castsafe %raw to {SAFE}", "%fa = gep %s, 0 -> &i64")
        b.emit(*_free_lines(b, dealloc, "raw"))
        b.emit("%va = load i64, %fa")
    else:
        # free during scope, second loop iteration, through a helper
        b.helper("release", _release_helper(b, dealloc))
        b.emit(f"%s = castsafe %raw to {SAFE}",
               "%fa = gep %s, 0 -> &i64",
               "%i0 = const i64 0",
               "br loop",
               "loop:",
               "%i = phi i64 [entry: %i0], [loop: %inext]",
               "%va = load i64, %fa",
               "call @release(%raw, %i)",
               "%one = const i64 1",
               "%inext = add i64 %i, %one",
               "%two = const i64 2",
               "%done = cmp eq %inext, %two",
               "condbr %done, exit, loop",
               "exit:")


def _rust_stack_dangling(b: _Builder):
    b.helper("make_dangling", _MAKE_DANGLING)
    b.emit(f"%raw = call {RAW} @make_dangling()")
    _cast_and_read(b)


def _rust_stack_return(b: _Builder):
    b.helper("derive", _DERIVE)
    b.helper("c_identity", _C_IDENTITY)
    b.emit(f"%d = call {SAFE} @derive()", "%fb = gep %d, 8 -> &i64", "%vb = load i64, %fb")


def _c_stack_dangling(b: _Builder):
    b.helper("c_local", _C_LOCAL)
    b.emit(f"%raw = call {RAW} @c_local()")
    _cast_and_read(b)


# ============================================================================
# Matrix
# ============================================================================


@dataclass
class _Spec:
    alloc: Site
    dealloc: Site | None
    invalidation: Invalidation
    permutation: int
    build: object
    expected: Verdict
    free_during_scope: bool = False
    before_cast: bool = False
    tag: str = ""


def _feasible_dealloc_cases() -> list[_Spec]:
    specs = []
    for alloc in HEAP_SITES:
        for dealloc in HEAP_SITES:
            # both allocators share one heap, so cross-language frees are legal
            for perm in range(3):
                specs.append(_Spec(
                    alloc, dealloc, Invalidation.DEALLOC, perm,
                    lambda b, a=alloc, d=dealloc, p=perm: _heap_dealloc(b, a, d, p),
                    Verdict.VIOLATION,
                    free_during_scope=perm > 0,
                    before_cast=perm == 0,
                ))
    # GLOBAL: statics are never deallocated.
    # stack objects released by a heap deallocator: the interceptor rejects
    # them before any pointer is used, which the heap pairs already cover.
    # heap objects released by a stack frame: not expressible.
    specs.append(_Spec(Site.RUST_STACK, Site.RUST_STACK, Invalidation.DEALLOC, 0,
                       _rust_stack_dangling, Verdict.VIOLATION, before_cast=True,
                       tag="dangling"))
    specs.append(_Spec(Site.RUST_STACK, Site.RUST_STACK, Invalidation.DEALLOC, 1,
                       _rust_stack_return, Verdict.VIOLATION, tag="return"))
    # C_STACK use-after-return of a safe pointer: foreign code cannot return
    # safe pointers, so only the dangling raw variant exists.
    specs.append(_Spec(Site.C_STACK, Site.C_STACK, Invalidation.DEALLOC, 0,
                       _c_stack_dangling, Verdict.VIOLATION, before_cast=True,
                       tag="dangling"))
    return specs


def _matrix() -> list[_Spec]:
    specs = []
    for invalidation, build, expected in (
        (Invalidation.NONE, _benign, Verdict.CLEAN_EXIT),
        (Invalidation.ARITHMETIC_OOB, _out_of_bounds, Verdict.VIOLATION),
        (Invalidation.CRAFTED_PTR, _crafted, Verdict.VIOLATION),
    ):
        for site in Site:
            for perm in range(2):
                specs.append(_Spec(
                    site,
                    site if site in HEAP_SITES else None,
                    invalidation,
                    perm,
                    lambda b, f=build, s=site, p=perm: f(b, s, p),
                    expected,
                    before_cast=invalidation is not Invalidation.NONE and perm == 0,
                ))
    return specs + _feasible_dealloc_cases()


def _case_id(spec: _Spec) -> str:
    parts = [spec.invalidation.value, spec.alloc.value]
    if spec.dealloc is not None and spec.invalidation is Invalidation.DEALLOC:
        parts.append(spec.dealloc.value)
    if spec.tag:
        parts.append(spec.tag)
    else:
        parts.append(f"p{spec.permutation}")
    return "-".join(parts)


def gen_corpus() -> list[CorpusCase]:
    """Generate every feasible case, in a fixed order.

    Returns:
        45 cases: 35 expected to report a violation, 10 expected to exit
        cleanly.
    """
    cases = []
    for spec in _matrix():
        case_id = _case_id(spec)
        builder = _Builder(case_id.replace("-", "_"))
        spec.build(builder)
        text = builder.render()
        program = parse_module(text, filename=f"{case_id}{SIR_SUFFIX}")
        cases.append(CorpusCase(
            id=case_id,
            alloc_site=spec.alloc,
            dealloc_site=spec.dealloc,
            invalidation=spec.invalidation,
            permutation=spec.permutation,
            text=text,
            program=program,
            expected=spec.expected,
            free_during_scope=spec.free_during_scope,
            invalidation_before_cast=spec.before_cast,
        ))
    logger.info("generated %d corpus cases", len(cases))
    return cases


def write_corpus(cases: list[CorpusCase], out_dir: Path | str) -> Path:
    """Write one ``.sir`` file per case plus a JSON manifest.

    Returns:
        Path of the manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for case in cases:
        (out_dir / f"{case.id}{SIR_SUFFIX}").write_text(case.text, encoding="utf-8")
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text(
        json.dumps({"cases": [case.to_dict() for case in cases]}, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest


def load_corpus(directory: Path | str) -> list[CorpusCase]:
    """Read a corpus written by write_corpus."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    cases = []
    for entry in manifest["cases"]:
        path = directory / f"{entry['id']}{SIR_SUFFIX}"
        text = path.read_text(encoding="utf-8")
        cases.append(CorpusCase(
            id=entry["id"],
            alloc_site=Site(entry["alloc_site"]),
            dealloc_site=Site(entry["dealloc_site"]) if entry["dealloc_site"] else None,
            invalidation=Invalidation(entry["invalidation"]),
            permutation=entry["permutation"],
            text=text,
            program=parse_module(text, filename=path.name),
            expected=Verdict(entry["expected"]),
            free_during_scope=entry["free_during_scope"],
            invalidation_before_cast=entry["invalidation_before_cast"],
        ))
    return cases
