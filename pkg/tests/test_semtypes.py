from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from protomodel import (
    Alias,
    ArrayOf,
    Boolean,
    Character,
    Composite,
    Enumeration,
    Text,
    UInt,
)
from protomodel.semtypes import (
    BOOLEAN,
    CHARACTER,
    CHARACTER_BUFFER,
    ENUM_BYTE_WIDTH,
    UNSIGNED_INTEGER,
    EnumRangeError,
    TypeTable,
    flatten,
    flatten_args,
    storage_byte_size,
    uint_byte_width,
    validate_model_types,
    validate_type,
)

RECORD_TYPE = Enumeration("RecordType", ["A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA"])
RECORD = Composite(
    "Record",
    [("record_type", RECORD_TYPE), ("name", Text(3)), ("rdata", Text(3))],
)


def test_uint_byte_width_rounds_up():
    assert uint_byte_width(1) == 1
    assert uint_byte_width(8) == 1
    assert uint_byte_width(9) == 2
    assert uint_byte_width(32) == 4
    assert uint_byte_width(64) == 8


def test_text_slot_reserves_terminator_byte():
    (slot,) = flatten(0, Text(5))
    assert slot.base_kind == CHARACTER_BUFFER
    assert slot.byte_width == 6
    assert slot.length == 5


def test_enum_slot_is_four_byte_integer_with_variants():
    (slot,) = flatten(0, RECORD_TYPE)
    assert slot.base_kind == UNSIGNED_INTEGER
    assert slot.byte_width == ENUM_BYTE_WIDTH
    assert slot.variants == ("A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA")


def test_composite_flattens_in_field_order_with_paths():
    slots = flatten(1, RECORD)
    assert [s.path for s in slots] == [
        (1, "record_type"),
        (1, "name"),
        (1, "rdata"),
    ]
    assert [s.var_name for s in slots] == ["x0", "x1", "x2"]


def test_flatten_args_numbers_slots_continuously():
    slots = flatten_args([Text(5), RECORD, Boolean()])
    assert [s.var_name for s in slots] == ["x0", "x1", "x2", "x3", "x4"]
    assert slots[0].path == (0,)
    assert slots[4].path == (2,)


def test_array_slots_use_integer_path_segments():
    slots = flatten(0, ArrayOf(Character(), 3))
    assert [s.path for s in slots] == [(0, 0), (0, 1), (0, 2)]
    assert all(s.base_kind == CHARACTER for s in slots)


def test_alias_is_transparent_to_flattening():
    direct = flatten(0, Text(7))
    aliased = flatten(0, Alias("Domain", Text(7)))
    assert direct == aliased


def test_enum_decode_maps_to_variant_name():
    (slot,) = flatten(0, RECORD_TYPE)
    assert slot.decode((5).to_bytes(4, "little")) == "DNAME"


def test_enum_decode_out_of_range_raises():
    (slot,) = flatten(0, RECORD_TYPE)
    with pytest.raises(EnumRangeError) as exc:
        slot.decode((99).to_bytes(4, "little"))
    assert "99" in str(exc.value)
    assert isinstance(exc.value, ValueError)


def test_buffer_decode_requires_terminator():
    (slot,) = flatten(0, Text(3))
    assert slot.decode(b"ab\0\0") == "ab"
    with pytest.raises(ValueError):
        slot.decode(b"abcd")


def test_buffer_decode_width_mismatch_raises():
    (slot,) = flatten(0, Text(3))
    with pytest.raises(ValueError):
        slot.decode(b"ab\0")


def test_storage_byte_size_sums_base_parts():
    assert storage_byte_size(RECORD) == 4 + 4 + 4
    assert storage_byte_size(Boolean()) == 1
    assert storage_byte_size(UInt(32)) == 4


# Round-trip property: encode(decode(bytes)) gives back the bytes the slot
# actually consumed, and decode(encode(value)) is identity on typed values.

printable = st.text(st.characters(min_codepoint=0x20, max_codepoint=0x7E), max_size=5)


@given(printable)
def test_buffer_encode_decode_round_trip(s):
    (slot,) = flatten(0, Text(5))
    assert slot.decode(slot.encode(s)) == s


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_uint_encode_decode_round_trip(v):
    (slot,) = flatten(0, UInt(32))
    assert slot.decode(slot.encode(v)) == v


@given(st.sampled_from(RECORD_TYPE.variants))
def test_enum_encode_decode_round_trip(name):
    (slot,) = flatten(0, RECORD_TYPE)
    assert slot.decode(slot.encode(name)) == name


@given(st.booleans())
def test_boolean_encode_decode_round_trip(b):
    (slot,) = flatten(0, Boolean())
    assert slot.decode(slot.encode(b)) is b


@settings(max_examples=200)
@given(st.integers(min_value=1, max_value=64))
def test_uint_slot_width_matches_storage(bits):
    (slot,) = flatten(0, UInt(bits))
    assert slot.byte_width == uint_byte_width(bits)
    assert slot.byte_width * 8 >= bits


def test_validate_type_rejects_bad_identifiers():
    problems = validate_type(Enumeration("2bad", ["A"]))
    assert problems
    assert any("2bad" in p for p in problems)


def test_validate_type_rejects_reserved_words():
    assert validate_type(Composite("struct", [("a", Boolean())]))
    assert validate_type(Composite("Ok", [("int", Boolean())]))


def test_validate_type_rejects_duplicate_fields():
    t = Composite("R", [("a", Boolean()), ("a", Text(2))])
    assert any("duplicate" in p for p in validate_type(t))


def test_validate_model_types_rejects_conflicting_redefinition():
    a = Enumeration("T", ["X"])
    b = Enumeration("T", ["Y"])
    assert any("T" in p for p in validate_model_types([a, b]))


def test_validate_model_types_accepts_repeated_identical_type():
    a = Enumeration("T", ["X"])
    assert validate_model_types([a, a]) == []


def test_type_table_renders_struct_and_enum_typedefs():
    table = TypeTable([RECORD])
    joined = "\n".join(table.typedef_lines())
    assert "typedef enum { A, AAAA, NS, TXT, CNAME, DNAME, SOA } RecordType;" in joined
    assert "typedef char String[4];" in joined
    assert "} Record;" in joined


def test_type_table_names_text_fields_consistently():
    # Two distinct Text(3) fields share one buffer typedef.
    table = TypeTable([RECORD])
    lines = [l for l in table.typedef_lines() if l.startswith("typedef char String")]
    assert len(lines) == 1


def test_type_table_sizes_disambiguated_when_several():
    r = Composite("R", [("a", Text(3)), ("b", Text(7))])
    table = TypeTable([r])
    assert table.text_alias_name(3) == "String3"
    assert table.text_alias_name(7) == "String7"
