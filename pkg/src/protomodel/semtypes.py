"""Semantic type IR for protocol models.

Types describe module inputs and outputs at the protocol level (booleans,
characters, bounded unsigned integers, bounded text, enumerations, arrays,
composites, aliases).  Two consumers sit downstream:

1. prompt/declaration rendering, which turns types into deterministic C
   typedef and signature text, and
2. harness emission / test reconstruction, which flattens each argument into
   base symbolic slots with fixed byte widths.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# C reserved words that may not be used as identifiers in the IR.
C_RESERVED = frozenset(
    """
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex _Imaginary bool true false
    """.split()
)


@dataclass(frozen=True)
class SemanticType:
    """Base class for all semantic types."""


@dataclass(frozen=True)
class Boolean(SemanticType):
    pass


@dataclass(frozen=True)
class Character(SemanticType):
    pass


@dataclass(frozen=True)
class UInt(SemanticType):
    """Unsigned integer bounded to `bits` bits (1..64)."""

    bits: int


@dataclass(frozen=True)
class Text(SemanticType):
    """Text of at most `max_len` characters, excluding the terminator."""

    max_len: int


@dataclass(frozen=True)
class Enumeration(SemanticType):
    name: str
    variants: Tuple[str, ...]

    def __init__(self, name: str, variants: Iterable[str]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "variants", tuple(variants))


@dataclass(frozen=True)
class ArrayOf(SemanticType):
    element: SemanticType
    length: int


@dataclass(frozen=True)
class Composite(SemanticType):
    name: str
    fields: Tuple[Tuple[str, SemanticType], ...]

    def __init__(self, name: str, fields: Iterable[Tuple[str, SemanticType]]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "fields", tuple((n, t) for n, t in fields))


@dataclass(frozen=True)
class Alias(SemanticType):
    name: str
    inner: SemanticType


NamedType = Union[Enumeration, Composite, Alias]

MAX_NESTING_DEPTH = 32


def _check_identifier(name: str, what: str, out: List[str]) -> None:
    if not IDENTIFIER_RE.match(name):
        out.append(f"{what} {name!r} is not a valid identifier")
    elif name in C_RESERVED:
        out.append(f"{what} {name!r} is a C reserved word")


def validate_type(t: SemanticType) -> List[str]:
    """Return every invariant violation in `t` (empty list means valid).

    Checks identifier syntax, variant/field uniqueness, bit and length
    bounds, nesting depth, and that named types are not redefined with a
    different shape inside one tree.
    """
    violations: List[str] = []
    named: dict[str, SemanticType] = {}

    def walk(t: SemanticType, depth: int) -> None:
        if depth > MAX_NESTING_DEPTH:
            violations.append(f"type nesting exceeds depth {MAX_NESTING_DEPTH}")
            return
        if isinstance(t, (Boolean, Character)):
            return
        if isinstance(t, UInt):
            if not 1 <= t.bits <= 64:
                violations.append(f"UInt bits {t.bits} outside 1..64")
            return
        if isinstance(t, Text):
            if t.max_len < 1:
                violations.append(f"Text max_len {t.max_len} must be >= 1")
            return
        if isinstance(t, Enumeration):
            _check_identifier(t.name, "enumeration name", violations)
            if not t.variants:
                violations.append(f"enumeration {t.name!r} has an empty variant list")
            seen = set()
            for v in t.variants:
                _check_identifier(v, "enumeration variant", violations)
                if v in seen:
                    violations.append(f"enumeration {t.name!r} repeats variant {v!r}")
                seen.add(v)
            _note_named(t)
            return
        if isinstance(t, ArrayOf):
            if t.length < 1:
                violations.append(f"array length {t.length} must be >= 1")
            walk(t.element, depth + 1)
            return
        if isinstance(t, Composite):
            _check_identifier(t.name, "composite name", violations)
            seen = set()
            for fname, ftype in t.fields:
                _check_identifier(fname, "field name", violations)
                if fname in seen:
                    violations.append(f"composite {t.name!r} has duplicate field name {fname!r}")
                seen.add(fname)
                walk(ftype, depth + 1)
            _note_named(t)
            return
        if isinstance(t, Alias):
            _check_identifier(t.name, "alias name", violations)
            walk(t.inner, depth + 1)
            _note_named(t)
            return
        violations.append(f"unknown type node {type(t).__name__}")

    def _note_named(t: NamedType) -> None:
        prior = named.get(t.name)
        if prior is not None and prior != t:
            violations.append(f"name {t.name!r} bound to two different type definitions")
        named[t.name] = t

    walk(t, 0)
    return violations


def validate_model_types(types: Sequence[SemanticType]) -> List[str]:
    """Validate a whole model's type set, including cross-type name uniqueness."""
    violations: List[str] = []
    named: dict[str, SemanticType] = {}
    for t in types:
        violations.extend(validate_type(t))
        for sub in iter_named(t):
            prior = named.get(sub.name)
            if prior is not None and prior != sub:
                violations.append(f"name {sub.name!r} bound to two different type definitions")
            named[sub.name] = sub
    return violations


def iter_named(t: SemanticType) -> Iterator[NamedType]:
    """Yield every named type (enumeration, composite, alias) inside `t`, children first."""
    if isinstance(t, ArrayOf):
        yield from iter_named(t.element)
    elif isinstance(t, Composite):
        for _, ftype in t.fields:
            yield from iter_named(ftype)
        yield t
    elif isinstance(t, Alias):
        yield from iter_named(t.inner)
        yield t
    elif isinstance(t, Enumeration):
        yield t


def resolve_alias(t: SemanticType) -> SemanticType:
    while isinstance(t, Alias):
        t = t.inner
    return t


def uint_byte_width(bits: int) -> int:
    """Smallest of 1/2/4/8 bytes covering `bits` bits."""
    for width in (1, 2, 4, 8):
        if bits <= width * 8:
            return width
    raise ValueError(f"UInt bits {bits} outside 1..64")


def uint_c_type(bits: int) -> str:
    return {1: "uint8_t", 2: "uint16_t", 4: "uint32_t", 8: "uint64_t"}[uint_byte_width(bits)]


# Width of an enum slot: enums are stored as 32-bit unsigned values, which is
# how the C compiler lays them out on the supported targets.
ENUM_BITS = 32
ENUM_BYTE_WIDTH = 4


class RenderError(ValueError):
    """Raised when an invalid type is rendered."""


class TypeTable:
    """Deterministic C rendering for every type a model references.

    Built from the model's root types (argument types, in declaration order),
    the table assigns alias names for anonymous Text occurrences that need
    them, and emits one-line typedefs in dependency order.  A Text used
    directly as a function parameter renders as `char*` and needs no alias;
    a Text stored in a struct field or array element gets a character-array
    alias named `String` when the model needs exactly one such size, or
    `String{N}` when it needs several.
    """

    def __init__(self, roots: Sequence[SemanticType]):
        violations = validate_model_types(list(roots))
        if violations:
            raise RenderError("; ".join(violations))
        self._roots = tuple(roots)
        self._alias_sizes = self._collect_alias_text_sizes()
        self._typedefs = self._collect_typedefs()

    # -- alias naming -------------------------------------------------

    def _collect_alias_text_sizes(self) -> Tuple[int, ...]:
        sizes: List[int] = []

        def walk(t: SemanticType, aliased: bool) -> None:
            if isinstance(t, Text):
                if aliased and t.max_len not in sizes:
                    sizes.append(t.max_len)
            elif isinstance(t, ArrayOf):
                walk(t.element, True)
            elif isinstance(t, Composite):
                for _, ftype in t.fields:
                    walk(ftype, True)
            elif isinstance(t, Alias):
                walk(t.inner, False)

        for root in self._roots:
            walk(root, False)
        return tuple(sorted(sizes))

    def text_alias_name(self, max_len: int) -> str:
        if len(self._alias_sizes) == 1:
            return "String"
        return f"String{max_len}"

    # -- typedef collection -------------------------------------------

    def _collect_typedefs(self) -> List[Tuple[str, str]]:
        """(name, one-line typedef text) pairs, dependencies before dependents."""
        ordered: List[Tuple[str, str]] = []
        emitted = set()

        def emit(name: str, text: str) -> None:
            if name not in emitted:
                emitted.add(name)
                ordered.append((name, text))

        def walk(t: SemanticType, aliased: bool) -> None:
            if isinstance(t, Text):
                if aliased:
                    name = self.text_alias_name(t.max_len)
                    emit(name, f"typedef char {name}[{t.max_len + 1}];")
            elif isinstance(t, Enumeration):
                body = ", ".join(t.variants)
                emit(t.name, f"typedef enum {{ {body} }} {t.name};")
            elif isinstance(t, ArrayOf):
                walk(t.element, True)
            elif isinstance(t, Composite):
                for _, ftype in t.fields:
                    walk(ftype, True)
                fields = " ".join(
                    self.field_decl(ftype, fname) for fname, ftype in t.fields
                )
                emit(t.name, f"typedef struct {{ {fields} }} {t.name};")
            elif isinstance(t, Alias):
                # Text/array aliases typedef the array form directly; other
                # inners are walked first so their typedefs come out earlier.
                if isinstance(t.inner, Text):
                    emit(t.name, f"typedef char {t.name}[{t.inner.max_len + 1}];")
                elif isinstance(t.inner, ArrayOf):
                    walk(t.inner.element, True)
                    elem = self.value_type(t.inner.element)
                    emit(t.name, f"typedef {elem} {t.name}[{t.inner.length}];")
                else:
                    walk(t.inner, False)
                    emit(t.name, f"typedef {self.value_type(t.inner)} {t.name};")

        for root in self._roots:
            walk(root, False)
        return ordered

    def typedef_lines(self) -> List[str]:
        return [text for _, text in self._typedefs]

    def typedef_lines_for(self, roots: Sequence[SemanticType]) -> List[str]:
        """Typedefs needed by `roots` only, in the table's global order.

        Alias names stay consistent with the full table, so a prompt that
        mentions a subset of the model's types never renames anything.
        """
        needed = set()

        def walk(t: SemanticType, aliased: bool) -> None:
            if isinstance(t, Text):
                if aliased:
                    needed.add(self.text_alias_name(t.max_len))
            elif isinstance(t, Enumeration):
                needed.add(t.name)
            elif isinstance(t, ArrayOf):
                walk(t.element, True)
            elif isinstance(t, Composite):
                for _, ftype in t.fields:
                    walk(ftype, True)
                needed.add(t.name)
            elif isinstance(t, Alias):
                walk(t.inner, False)
                needed.add(t.name)

        for root in roots:
            walk(root, False)
        return [text for name, text in self._typedefs if name in needed]

    # -- declaration fragments ----------------------------------------

    def value_type(self, t: SemanticType) -> str:
        """C type name for value positions (struct fields use field_decl)."""
        if isinstance(t, Boolean):
            return "bool"
        if isinstance(t, Character):
            return "char"
        if isinstance(t, UInt):
            return uint_c_type(t.bits)
        if isinstance(t, Text):
            return self.text_alias_name(t.max_len)
        if isinstance(t, (Enumeration, Composite, Alias)):
            return t.name
        raise RenderError(f"no value type for {type(t).__name__}")

    def field_decl(self, t: SemanticType, name: str) -> str:
        """One struct-field declaration, terminated with a semicolon."""
        if isinstance(t, ArrayOf):
            return f"{self.value_type(t.element)} {name}[{t.length}];"
        return f"{self.value_type(t)} {name};"

    def param_decl(self, t: SemanticType, name: str) -> str:
        """One function-parameter declaration (bare Text decays to char*)."""
        if isinstance(t, Text):
            return f"char* {name}"
        if isinstance(t, ArrayOf):
            return f"{self.value_type(t.element)}* {name}"
        return f"{self.value_type(t)} {name}"

    def return_type(self, t: SemanticType) -> str:
        resolved = resolve_alias(t)
        if isinstance(resolved, Text):
            return "char*"
        if isinstance(resolved, ArrayOf):
            return f"{self.value_type(resolved.element)}*"
        return self.value_type(t)

    def storage_decl(self, t: SemanticType, name: str) -> str:
        """Declaration reserving storage for a value of `t` (harness locals)."""
        if isinstance(t, Text):
            return f"char {name}[{t.max_len + 1}];"
        if isinstance(t, ArrayOf):
            return f"{self.value_type(t.element)} {name}[{t.length}];"
        return f"{self.value_type(t)} {name};"


# ---------------------------------------------------------------------------
# Flattening into base symbolic slots
# ---------------------------------------------------------------------------

BOOLEAN = "boolean"
CHARACTER = "character"
UNSIGNED_INTEGER = "unsigned-integer"
CHARACTER_BUFFER = "character-buffer"

PathSegment = Union[int, str]


@dataclass(frozen=True)
class BaseSlot:
    """One base symbolic variable: name, path into the argument tree, and width.

    `path` starts with the argument index; field names and array indices
    follow.  For enumeration slots `variants` carries the declared variant
    names so decoded values can be mapped back.
    """

    var_name: str
    path: Tuple[PathSegment, ...]
    base_kind: str
    byte_width: int
    bits: Optional[int] = None
    length: Optional[int] = None
    variants: Optional[Tuple[str, ...]] = None

    def decode(self, data: bytes) -> object:
        """Typed value from this slot's engine bytes (little-endian integers)."""
        if len(data) != self.byte_width:
            raise ValueError(
                f"object for {self.var_name} has {len(data)} bytes, expected {self.byte_width}"
            )
        if self.base_kind == BOOLEAN:
            return data[0] != 0
        if self.base_kind == CHARACTER:
            return chr(data[0])
        if self.base_kind == UNSIGNED_INTEGER:
            value = int.from_bytes(data, "little")
            if self.variants is not None:
                if value >= len(self.variants):
                    raise EnumRangeError(self.var_name, value, len(self.variants))
                return self.variants[value]
            return value
        if self.base_kind == CHARACTER_BUFFER:
            raw = data.split(b"\0", 1)[0]
            if self.length is not None and len(raw) > self.length:
                raise ValueError(
                    f"{self.var_name}: buffer of {len(raw)} bytes has no terminator "
                    f"within max_len {self.length}"
                )
            return raw.decode("latin-1")
        raise ValueError(f"unknown base kind {self.base_kind}")

    def encode(self, value: object) -> bytes:
        """Inverse of decode (zero-padded buffers, little-endian integers)."""
        if self.base_kind == BOOLEAN:
            return b"\x01" if value else b"\x00"
        if self.base_kind == CHARACTER:
            return bytes([ord(value)])  # type: ignore[arg-type]
        if self.base_kind == UNSIGNED_INTEGER:
            if self.variants is not None and isinstance(value, str):
                value = self.variants.index(value)
            return int(value).to_bytes(self.byte_width, "little")  # type: ignore[arg-type]
        if self.base_kind == CHARACTER_BUFFER:
            raw = str(value).encode("latin-1")
            return raw.ljust(self.byte_width, b"\0")
        raise ValueError(f"unknown base kind {self.base_kind}")


class EnumRangeError(ValueError):
    """An engine-produced enum value falls outside the declared variants."""

    def __init__(self, var_name: str, value: int, variant_count: int):
        super().__init__(
            f"{var_name}: enum value {value} out of range for {variant_count} variants"
        )
        self.var_name = var_name
        self.value = value
        self.variant_count = variant_count


def flatten(arg_index: int, t: SemanticType, start: int = 0) -> List[BaseSlot]:
    """Flatten one argument into ordered base slots.

    Slot variable names continue the `x{i}` sequence from `start`, so a
    caller traversing all of main's arguments left to right gets globally
    unique names.
    """
    slots: List[BaseSlot] = []

    def leaf(path: Tuple[PathSegment, ...], kind: str, width: int, **extra) -> None:
        idx = start + len(slots)
        slots.append(BaseSlot(f"x{idx}", path, kind, width, **extra))

    def walk(t: SemanticType, path: Tuple[PathSegment, ...]) -> None:
        if isinstance(t, Boolean):
            leaf(path, BOOLEAN, 1)
        elif isinstance(t, Character):
            leaf(path, CHARACTER, 1)
        elif isinstance(t, UInt):
            leaf(path, UNSIGNED_INTEGER, uint_byte_width(t.bits), bits=t.bits)
        elif isinstance(t, Text):
            leaf(path, CHARACTER_BUFFER, t.max_len + 1, length=t.max_len)
        elif isinstance(t, Enumeration):
            leaf(path, UNSIGNED_INTEGER, ENUM_BYTE_WIDTH, bits=ENUM_BITS, variants=t.variants)
        elif isinstance(t, ArrayOf):
            for i in range(t.length):
                walk(t.element, path + (i,))
        elif isinstance(t, Composite):
            for fname, ftype in t.fields:
                walk(ftype, path + (fname,))
        elif isinstance(t, Alias):
            walk(t.inner, path)
        else:
            raise ValueError(f"cannot flatten {type(t).__name__}")

    walk(t, (arg_index,))
    return slots


def flatten_args(types: Sequence[SemanticType]) -> List[BaseSlot]:
    """Flatten a full argument list with one continuous x{i} numbering."""
    slots: List[BaseSlot] = []
    for arg_index, t in enumerate(types):
        slots.extend(flatten(arg_index, t, start=len(slots)))
    return slots


def storage_byte_size(t: SemanticType) -> int:
    """Packed byte size of a value of `t` (sum over base parts, no padding)."""
    return sum(slot.byte_width for slot in flatten(0, t))
