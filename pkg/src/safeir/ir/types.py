"""Type shapes, pointer kinds and ABI classes of the IR.

Design decisions:
- Shapes are frozen dataclasses so they compare structurally and can be
  shared between modules without copying.
- byte_size has no padding model: structs sum their fields, unions take the
  largest field, every pointer is one machine word.
- Slices and trait objects are fat pointers; their data pointer is always
  classified RAW.
- FnPtr values are never dereferenced by loads or stores, so they classify
  as NOPTR.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..constants import FAT_POINTER_SIZE, INT_WIDTHS, WORD_SIZE
from ..exceptions import SafeIRError


class ShapeError(SafeIRError):
    """Raised when a TypeShape is malformed."""
    pass


# ============================================================================
# Pointer kinds
# ============================================================================


class PtrKind(Enum):
    """Classification attached to every IR value.

    NONPOINTER is the "not a pointer" marker so a KindMap is a total map onto
    one enum.
    """

    SAFE = "safe"
    RAW = "raw"
    NOPTR = "noptr"
    NONPOINTER = "none"

    @property
    def is_pointer(self) -> bool:
        return self is not PtrKind.NONPOINTER

    @property
    def is_elidable(self) -> bool:
        """True for kinds whose dereferences need no dynamic check."""
        return self in (PtrKind.SAFE, PtrKind.NOPTR)


def meet(a: PtrKind, b: PtrKind) -> PtrKind:
    """Dataflow meet of two pointer kinds.

    RAW absorbs everything, SAFE and NOPTR meet to SAFE, and mixing a pointer
    kind with NONPOINTER degrades to RAW.

    Example:
        >>> meet(PtrKind.SAFE, PtrKind.RAW)
        <PtrKind.RAW: 'raw'>
    """
    if a is b:
        return a
    if PtrKind.RAW in (a, b):
        return PtrKind.RAW
    if PtrKind.NONPOINTER in (a, b):
        return PtrKind.RAW
    return PtrKind.SAFE


# ============================================================================
# Shapes
# ============================================================================


class TypeShape:
    """Base class of all shapes."""

    @property
    def byte_size(self) -> int:
        raise NotImplementedError

    @property
    def is_pointer(self) -> bool:
        return False


@dataclass(frozen=True)
class Int(TypeShape):
    width: int

    @property
    def byte_size(self) -> int:
        return self.width // 8

    def __str__(self) -> str:
        return f"i{self.width}"


@dataclass(frozen=True)
class ZeroSized(TypeShape):
    @property
    def byte_size(self) -> int:
        return 0

    def __str__(self) -> str:
        return "zst"


@dataclass(frozen=True)
class SafePtr(TypeShape):
    pointee: TypeShape

    @property
    def byte_size(self) -> int:
        return WORD_SIZE

    @property
    def is_pointer(self) -> bool:
        return True

    def __str__(self) -> str:
        return f"&{self.pointee}"


@dataclass(frozen=True)
class RawPtr(TypeShape):
    pointee: TypeShape

    @property
    def byte_size(self) -> int:
        return WORD_SIZE

    @property
    def is_pointer(self) -> bool:
        return True

    def __str__(self) -> str:
        return f"*{self.pointee}"


@dataclass(frozen=True)
class Struct(TypeShape):
    fields: tuple[TypeShape, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def byte_size(self) -> int:
        return sum(f.byte_size for f in self.fields)

    def __str__(self) -> str:
        return "{" + ", ".join(str(f) for f in self.fields) + "}"


@dataclass(frozen=True)
class Union(TypeShape):
    fields: tuple[TypeShape, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def byte_size(self) -> int:
        return max((f.byte_size for f in self.fields), default=0)

    def __str__(self) -> str:
        return "union{" + ", ".join(str(f) for f in self.fields) + "}"


@dataclass(frozen=True)
class Array(TypeShape):
    elem: TypeShape
    count: int

    @property
    def byte_size(self) -> int:
        return self.count * self.elem.byte_size

    def __str__(self) -> str:
        return f"[{self.elem}; {self.count}]"


@dataclass(frozen=True)
class Slice(TypeShape):
    elem: TypeShape

    @property
    def byte_size(self) -> int:
        return FAT_POINTER_SIZE

    @property
    def is_pointer(self) -> bool:
        return True

    def __str__(self) -> str:
        return f"[{self.elem}]"


@dataclass(frozen=True)
class TraitObject(TypeShape):
    @property
    def byte_size(self) -> int:
        return FAT_POINTER_SIZE

    @property
    def is_pointer(self) -> bool:
        return True

    def __str__(self) -> str:
        return "dyn"


@dataclass(frozen=True)
class FnPtr(TypeShape):
    @property
    def byte_size(self) -> int:
        return WORD_SIZE

    @property
    def is_pointer(self) -> bool:
        return True

    def __str__(self) -> str:
        return "fn"


I8 = Int(8)
I32 = Int(32)
I64 = Int(64)


def check_shape(shape: TypeShape) -> None:
    """Raise ShapeError unless ``shape`` is well-formed.

    Args:
        shape: Shape to check, recursively.

    Raises:
        ShapeError: Unknown integer width, negative array count, empty union
            or an object that is not a TypeShape.
    """
    if not isinstance(shape, TypeShape) or type(shape) is TypeShape:
        raise ShapeError(f"not a type shape: {shape!r}")
    if isinstance(shape, Int):
        if shape.width not in INT_WIDTHS:
            raise ShapeError(f"unsupported integer width {shape.width}")
    elif isinstance(shape, (SafePtr, RawPtr)):
        check_shape(shape.pointee)
    elif isinstance(shape, Struct):
        for field in shape.fields:
            check_shape(field)
    elif isinstance(shape, Union):
        if not shape.fields:
            raise ShapeError("union without fields")
        for field in shape.fields:
            check_shape(field)
    elif isinstance(shape, Array):
        if shape.count < 0:
            raise ShapeError(f"negative array count {shape.count}")
        check_shape(shape.elem)
    elif isinstance(shape, Slice):
        check_shape(shape.elem)


# ============================================================================
# ABI classification
# ============================================================================


@dataclass(frozen=True)
class Uninhabited:
    def __str__(self) -> str:
        return "Uninhabited"


@dataclass(frozen=True)
class Scalar:
    kind: PtrKind

    def __str__(self) -> str:
        return f"Scalar({self.kind.name})"


@dataclass(frozen=True)
class ScalarPair:
    first: PtrKind
    second: PtrKind

    def __str__(self) -> str:
        return f"ScalarPair({self.first.name}, {self.second.name})"


@dataclass(frozen=True)
class Aggregate:
    def __str__(self) -> str:
        return "Aggregate"


AbiClass = Uninhabited | Scalar | ScalarPair | Aggregate


def _flatten(shape: TypeShape) -> list[TypeShape]:
    """Leaves of ``shape`` reachable without indirection, zero-sized ones dropped.

    Unions stay leaves; they are classified by their own rule.
    """
    if isinstance(shape, Struct):
        return [leaf for field in shape.fields for leaf in _flatten(field)]
    if isinstance(shape, Array):
        return _flatten(shape.elem) * shape.count
    if shape.byte_size == 0:
        return []
    return [shape]


def pointer_leaves(shape: TypeShape) -> list[TypeShape]:
    """Every pointer-like leaf reachable without indirection, unions opened."""
    leaves = []
    for leaf in _flatten(shape):
        if isinstance(leaf, Union):
            for field in leaf.fields:
                leaves.extend(pointer_leaves(field))
        elif leaf.is_pointer:
            leaves.append(leaf)
    return leaves


def _classify_union(shape: Union) -> AbiClass:
    fits = shape.byte_size == WORD_SIZE or (
        shape.byte_size < WORD_SIZE and not pointer_leaves(shape)
    )
    if not fits:
        return Aggregate()
    if all(classify_abi(f) == Scalar(PtrKind.SAFE) for f in shape.fields):
        return Scalar(PtrKind.SAFE)
    if pointer_leaves(shape):
        return Scalar(PtrKind.RAW)
    return Scalar(PtrKind.NONPOINTER)


def classify_abi(shape: TypeShape) -> AbiClass:
    """Classify a shape the way the code generator passes it around.

    Args:
        shape: A well-formed shape.

    Returns:
        Uninhabited for zero-sized shapes, Scalar for shapes that flatten to a
        single leaf (kind taken from that leaf), ScalarPair for fat pointers
        and Aggregate for everything else.

    Raises:
        ShapeError: If the shape is malformed.

    Example:
        >>> classify_abi(Struct([RawPtr(I32)]))
        Scalar(kind=<PtrKind.RAW: 'raw'>)
    """
    check_shape(shape)
    if shape.byte_size == 0:
        return Uninhabited()

    leaves = _flatten(shape)
    if len(leaves) != 1:
        return Aggregate()

    leaf = leaves[0]
    if isinstance(leaf, SafePtr):
        return Scalar(PtrKind.SAFE)
    if isinstance(leaf, RawPtr):
        return Scalar(PtrKind.RAW)
    if isinstance(leaf, FnPtr):
        return Scalar(PtrKind.NOPTR)
    if isinstance(leaf, Slice):
        return ScalarPair(PtrKind.RAW, PtrKind.NONPOINTER)
    if isinstance(leaf, TraitObject):
        # second element is the vtable pointer
        return ScalarPair(PtrKind.RAW, PtrKind.SAFE)
    if isinstance(leaf, Union):
        return _classify_union(leaf)
    return Scalar(PtrKind.NONPOINTER)


def shape_kind(shape: TypeShape | None) -> PtrKind:
    """Declared kind of a value with the given shape.

    Scalars carry their leaf kind, fat pointers count as RAW (their data
    pointer), everything else is not a pointer.
    """
    if shape is None:
        return PtrKind.NONPOINTER
    abi = classify_abi(shape)
    if isinstance(abi, Scalar):
        return abi.kind
    if isinstance(abi, ScalarPair):
        return PtrKind.RAW
    return PtrKind.NONPOINTER


def pointee_of(shape: TypeShape) -> TypeShape | None:
    """Pointee of a single-pointer shape, looking through transparent wrappers."""
    leaves = _flatten(shape)
    if len(leaves) == 1 and isinstance(leaves[0], (SafePtr, RawPtr)):
        return leaves[0].pointee
    return None
