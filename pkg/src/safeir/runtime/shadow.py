"""Tagged shadow memory.

Every allocation receives an 8-bit tag. The tag is written to the shadow
entry of each granule the allocation covers and to the top byte of every
pointer into it. A check passes iff all granules it touches carry the
pointer's tag and belong to a live allocation.

Design decisions:
- Tags come from a sequential counter (1..255, 0 skipped), so two
  consecutive allocations never share a tag and adjacent overflows are
  always caught.
- Release retags granules with a fresh tag instead of clearing them; a stale
  pointer keeps its old tag and mismatches.
- Allocations are granule-aligned and padded to whole granules. An overflow
  that stays inside the last, partially used granule is not detected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from ..constants import ADDRESS_MASK, DEFAULT_GRANULE, INVALID_TAG, MAX_TAG, TAG_SHIFT, WORD_MASK
from ..ir.instructions import SourceLocation

logger = logging.getLogger(__name__)


class AllocKind(Enum):
    HEAP = "heap"
    STACK = "stack"
    GLOBAL = "global"


class ViolationKind(Enum):
    TAG_MISMATCH = "tag_mismatch"
    NULL_DEREF = "null_deref"
    DOUBLE_FREE = "double_free"
    INVALID_FREE = "invalid_free"


# Check name reported for faults found by the free interceptor.
INTERCEPT = "INTERCEPT"


@dataclass(frozen=True)
class TaggedAddress:
    """A 64-bit pointer: tag in the top byte, address in the low 56 bits."""

    value: int

    @classmethod
    def make(cls, address: int, tag: int) -> "TaggedAddress":
        return cls(((tag & 0xFF) << TAG_SHIFT) | (address & ADDRESS_MASK))

    @property
    def tag(self) -> int:
        return (self.value & WORD_MASK) >> TAG_SHIFT

    @property
    def address(self) -> int:
        return self.value & ADDRESS_MASK

    def __str__(self) -> str:
        return f"0x{self.value & WORD_MASK:016x}"


@dataclass
class Violation:
    """A sanitizer report.

    ``check`` is the CheckKind name of the failing check, or INTERCEPT for
    faults raised by the free interceptor. The location fields are filled in
    by the interpreter.
    """

    kind: ViolationKind
    address: int
    expected_tag: int
    found_tag: int
    check: str = ""
    instruction: str = ""
    function: str = ""
    location: SourceLocation | None = None

    def __str__(self) -> str:
        where = str(self.location) if self.location is not None else self.instruction
        return (
            f"{self.kind.name} ({self.check}) at {where or '?'}: address 0x{self.address:x}, "
            f"pointer tag {self.expected_tag}, memory tag {self.found_tag}"
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.name,
            "check": self.check,
            "instruction": self.instruction,
            "function": self.function,
            "location": self.location.to_dict() if self.location is not None else None,
            "address": self.address,
            "expected_tag": self.expected_tag,
            "found_tag": self.found_tag,
        }


@dataclass
class Allocation:
    id: int
    base: int
    size: int
    tag: int
    kind: AllocKind
    alive: bool = True

    def granules(self, granule: int) -> range:
        span = max(self.size, 1)
        return range(self.base // granule, (self.base + span - 1) // granule + 1)


@dataclass
class ShadowState:
    """Shadow tags, allocation table and tag counter."""

    granule: int = DEFAULT_GRANULE
    tags: dict[int, int] = field(default_factory=dict)
    allocations: dict[int, Allocation] = field(default_factory=dict)
    owners: dict[int, int] = field(default_factory=dict)
    bases: dict[int, int] = field(default_factory=dict)
    next_tag: int = 1
    allocated_bytes: int = 0
    freed_bytes: int = 0

    def __post_init__(self):
        if self.granule < 1 or self.granule & (self.granule - 1):
            raise ValueError(f"granule must be a power of two, got {self.granule}")

    def fresh_tag(self) -> int:
        tag = self.next_tag
        self.next_tag = self.next_tag % MAX_TAG + 1
        return tag

    def padded(self, size: int) -> int:
        """Bytes an allocation of ``size`` occupies, whole granules, at least one."""
        granules = max(size, 1) + self.granule - 1
        return granules - granules % self.granule

    def allocate(self, base: int, size: int, kind: AllocKind) -> Allocation:
        """Tag ``[base, base + size)`` as a new live allocation.

        Raises:
            ValueError: If ``base`` is not granule-aligned.
        """
        if base % self.granule:
            raise ValueError(f"allocation base 0x{base:x} is not granule-aligned")
        alloc = Allocation(len(self.allocations) + 1, base, size, self.fresh_tag(), kind)
        self.allocations[alloc.id] = alloc
        for index in alloc.granules(self.granule):
            self.tags[index] = alloc.tag
            self.owners[index] = alloc.id
        if kind is AllocKind.HEAP:
            self.bases[base] = alloc.id
        self.allocated_bytes += size
        logger.debug("allocate %s #%d base=0x%x size=%d tag=%d",
                     kind.value, alloc.id, base, size, alloc.tag)
        return alloc

    def release(self, alloc: Allocation) -> None:
        """Mark ``alloc`` dead and retag its granules."""
        alloc.alive = False
        tag = self.fresh_tag()
        for index in alloc.granules(self.granule):
            if self.owners.get(index) == alloc.id:
                self.tags[index] = tag
        self.freed_bytes += alloc.size

    def owner(self, granule_index: int) -> Allocation | None:
        alloc_id = self.owners.get(granule_index)
        return self.allocations.get(alloc_id) if alloc_id is not None else None

    def heap_allocation_at(self, base: int) -> Allocation | None:
        alloc_id = self.bases.get(base)
        return self.allocations.get(alloc_id) if alloc_id is not None else None

    @property
    def live_bytes(self) -> int:
        return sum(a.size for a in self.allocations.values() if a.alive)


def check_predicate(s: ShadowState, addr: TaggedAddress | int, size: int) -> Violation | None:
    """Validate an access of ``size`` bytes through ``addr``.

    Args:
        s: Shadow state.
        addr: Tagged pointer being checked.
        size: Bytes covered by the check, at least 1.

    Returns:
        None when every granule overlapping the range carries the pointer's
        tag and belongs to a live allocation; otherwise a NULL_DEREF or
        TAG_MISMATCH violation for the first failing granule.

    Raises:
        ValueError: If ``size`` is below 1.
    """
    if size < 1:
        raise ValueError(f"check size must be at least 1, got {size}")
    if not isinstance(addr, TaggedAddress):
        addr = TaggedAddress(addr)
    if addr.address == 0:
        return Violation(ViolationKind.NULL_DEREF, 0, addr.tag, INVALID_TAG)

    first = addr.address // s.granule
    last = (addr.address + size - 1) // s.granule
    for index in range(first, last + 1):
        found = s.tags.get(index, INVALID_TAG)
        owner = s.owner(index)
        if addr.tag == INVALID_TAG or found != addr.tag or owner is None or not owner.alive:
            return Violation(
                ViolationKind.TAG_MISMATCH,
                max(addr.address, index * s.granule),
                addr.tag,
                found,
            )
    return None


def intercept_free(s: ShadowState, addr: TaggedAddress | int) -> Violation | None:
    """Free interceptor, run for every deallocation in every mode.

    Returns:
        None after releasing the allocation (``free(NULL)`` is a no-op);
        DOUBLE_FREE for an already freed base; INVALID_FREE for anything that
        is not the base of a heap allocation or carries the wrong tag.
    """
    if not isinstance(addr, TaggedAddress):
        addr = TaggedAddress(addr)
    if addr.address == 0:
        return None
    alloc = s.heap_allocation_at(addr.address)
    if alloc is None:
        found = s.tags.get(addr.address // s.granule, INVALID_TAG)
        return Violation(ViolationKind.INVALID_FREE, addr.address, addr.tag, found, INTERCEPT)
    if not alloc.alive:
        return Violation(ViolationKind.DOUBLE_FREE, addr.address, addr.tag,
                         s.tags.get(addr.address // s.granule, INVALID_TAG), INTERCEPT)
    if addr.tag != alloc.tag:
        return Violation(ViolationKind.INVALID_FREE, addr.address, addr.tag, alloc.tag, INTERCEPT)
    s.release(alloc)
    return None
