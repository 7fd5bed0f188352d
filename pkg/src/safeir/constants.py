"""Shared constants for safeir.

Machine model, runtime memory layout and configuration names live here so
the IR, the passes and the runtime agree on them.
"""

# Machine word in bytes. Every pointer shape has this size.
WORD_SIZE: int = 8

# Slice and trait-object shapes are (data pointer, metadata) pairs.
FAT_POINTER_SIZE: int = 2 * WORD_SIZE

# Legal integer widths, in bits.
INT_WIDTHS: tuple[int, ...] = (8, 16, 32, 64)

# ----------------------------------------------------------------------------
# Tagged memory
# ----------------------------------------------------------------------------

DEFAULT_GRANULE: int = 16

# Top byte of a 64-bit pointer holds the tag, the low 56 bits the address.
TAG_SHIFT: int = 56
ADDRESS_MASK: int = (1 << TAG_SHIFT) - 1
WORD_MASK: int = (1 << 64) - 1

# Tag 0 marks unallocated / invalid memory. Live allocations use 1..MAX_TAG.
INVALID_TAG: int = 0
MAX_TAG: int = 255

# Synthetic address space. Regions are far enough apart that the corpus never
# makes them collide.
DEFAULT_CODE_BASE: int = 0x0000_1000
DEFAULT_GLOBAL_BASE: int = 0x0010_0000
DEFAULT_HEAP_BASE: int = 0x1000_0000
DEFAULT_STACK_BASE: int = 0x7000_0000

DEFAULT_MAX_STEPS: int = 1_000_000

# ----------------------------------------------------------------------------
# Runtime-supplied functions
# ----------------------------------------------------------------------------

# Declaration-only functions whose bodies the runtime provides.
ALLOCATOR_NAMES: frozenset[str] = frozenset({"malloc", "__rust_alloc"})
DEALLOCATOR_NAMES: frozenset[str] = frozenset({"free", "__rust_dealloc"})

# ----------------------------------------------------------------------------
# Instrumentation modes
# ----------------------------------------------------------------------------

MODE_NONE: str = "none"
MODE_BASELINE: str = "baseline"
MODE_SAFEFFI: str = "safeffi"
MODE_SAFEFFI_HEAP: str = "safeffi-heap"

INSTRUMENT_MODES: tuple[str, ...] = (MODE_BASELINE, MODE_SAFEFFI, MODE_SAFEFFI_HEAP)
RUN_MODES: tuple[str, ...] = (MODE_NONE,) + INSTRUMENT_MODES

# ----------------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------------

NOFREE_DB_ENV: str = "SAFEIR_NOFREE_DB"
DATA_DIR_NAME: str = ".safeir"
DEFAULT_NOFREE_DB_NAME: str = "nofree.tsv"
DEFAULT_HISTORY_DB_NAME: str = "safeir.db"

# File suffixes routed to the SQLite annotation store instead of TSV.
SQLITE_SUFFIXES: frozenset[str] = frozenset({".db", ".sqlite", ".sqlite3"})

SIR_SUFFIX: str = ".sir"
