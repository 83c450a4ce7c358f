"""Descriptor encoding and decoding."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvmcheck.pagetable import SetupError, encode_descriptor
from rvmcheck.walk import DescKind, decode_descriptor

PAGE = 0x1000


def test_invalid_descriptor_is_zero_low_bits():
    raw = encode_descriptor("invalid")
    assert raw & 0b11 == 0
    assert not decode_descriptor(raw, 3, 1).valid


def test_page_descriptor_roundtrip():
    raw = encode_descriptor("page", 0xA00000, 3)
    view = decode_descriptor(raw, 3, 1)
    assert view.kind is DescKind.PAGE
    assert view.oa == 0xA00000
    assert view.valid


def test_table_descriptor_roundtrip():
    raw = encode_descriptor("table", 0x283000, 1)
    view = decode_descriptor(raw, 1, 1)
    assert view.kind is DescKind.TABLE
    assert view.table_addr == 0x283000


@pytest.mark.parametrize("level", [1, 2])
def test_block_descriptor_roundtrip(level):
    base = 0x40000000 if level == 1 else 0x200000
    raw = encode_descriptor("block", base, level)
    view = decode_descriptor(raw, level, 1)
    assert view.kind is DescKind.BLOCK
    assert view.oa == base


def test_block_descriptor_bits_decode_as_invalid_at_level_3():
    # low bits 0b01 at level 3 are a reserved encoding
    view = decode_descriptor(0xA00001, 3, 1)
    assert not view.valid


def test_table_bits_decode_as_page_at_level_3():
    view = decode_descriptor(0xA00003 | (1 << 10), 3, 1)
    assert view.kind is DescKind.PAGE
    assert view.af


def test_illegal_encodings_rejected():
    with pytest.raises(SetupError):
        encode_descriptor("table", 0x283000, 3)
    with pytest.raises(SetupError):
        encode_descriptor("page", 0xA00000, 2)
    with pytest.raises(SetupError):
        encode_descriptor("block", 0xA00000, 3)


def test_ap_bits_decoded():
    raw = encode_descriptor("page", 0xA00000, 3, {"AP": 0b10})
    assert decode_descriptor(raw, 3, 1).ap == 0b10


@given(st.integers(min_value=0, max_value=(1 << 36) - 1))
def test_page_oa_roundtrip_any_frame(frame):
    oa = frame * PAGE
    raw = encode_descriptor("page", oa, 3)
    assert decode_descriptor(raw, 3, 1).oa == oa


@given(st.integers(min_value=0, max_value=(1 << 64) - 1))
def test_decode_total_and_masks_value(raw):
    for level in range(4):
        for stage in (1, 2):
            view = decode_descriptor(raw, level, stage)
            assert view.level == level
            assert view.stage == stage
            if raw & 0b1 == 0:
                assert not view.valid
