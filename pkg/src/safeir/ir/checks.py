"""Dynamic check sites carried as pseudo-instructions in the IR."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class CheckKind(Enum):
    """What placed a check and why."""

    DEREF = "deref"
    CAST = "cast"
    LOAD = "load"
    PARAM = "param"
    RETURN = "ret"
    HEAP = "heap"

    @property
    def is_ensure(self) -> bool:
        """Boundary checks print as ``ensure``; per-dereference checks as ``check``."""
        return self is not CheckKind.DEREF

    @property
    def placed_after_anchor(self) -> bool:
        """LOAD and RETURN checks validate the value the anchor just produced."""
        return self in (CheckKind.LOAD, CheckKind.RETURN)

    @classmethod
    def from_token(cls, token: str) -> "CheckKind":
        for kind in cls:
            if kind.value == token:
                return kind
        raise ValueError(f"unknown check kind '{token}'")


# Kinds that may precede an anchor, in emission order.
BEFORE_ORDER: tuple[CheckKind, ...] = (
    CheckKind.PARAM,
    CheckKind.HEAP,
    CheckKind.CAST,
    CheckKind.DEREF,
)
AFTER_ORDER: tuple[CheckKind, ...] = (CheckKind.LOAD, CheckKind.RETURN)

_ORIGINS = {
    CheckKind.DEREF: "baseline",
    CheckKind.HEAP: "dealloc_graph",
}


@dataclass(frozen=True)
class CheckSite:
    """A dynamic check inserted by an instrumentation pass.

    Attributes:
        kind: Check category.
        anchor: uid of the instruction the check guards.
        value: Value id whose pointer is checked.
        size: Number of bytes validated, always >= 1.
    """

    kind: CheckKind
    anchor: str
    value: str
    size: int

    @property
    def origin(self) -> str:
        return _ORIGINS.get(self.kind, "cast_boundary")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.name,
            "anchor": self.anchor,
            "value": self.value,
            "size": self.size,
            "origin": self.origin,
        }
