from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from linempc.bits import (
    BitReader,
    BitWriter,
    Bits,
    FormatError,
    ceil_log2,
    concat,
    frame,
    pack_words,
    unframe,
    unpack_words,
)


@pytest.mark.parametrize("x, expected", [(0, 0), (1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (1024, 10)])
def test_ceil_log2(x, expected):
    assert ceil_log2(x) == expected


def test_bits_are_msb_first():
    b = Bits.from_str("0011")
    assert b.value == 3 and str(b) == "0011"
    assert str(b + Bits.from_str("1")) == "00111"
    assert str(b.slice(1, 2)) == "01"
    assert str(b.pad_to(6)) == "001100"


def test_bits_reject_overflow():
    with pytest.raises(ValueError):
        Bits(4, 2)


def test_to_bytes_pads_right():
    assert Bits.from_str("1").to_bytes() == b"\x80"
    assert Bits.from_bytes(b"\x80", 1) == Bits(1, 1)
    assert Bits.empty().to_bytes() == b""


@given(st.lists(st.tuples(st.integers(0, 40), st.data()), max_size=20))
def test_writer_reader_roundtrip(items):
    fields = []
    for width, data in items:
        fields.append((data.draw(st.integers(0, (1 << width) - 1)), width))
    w = BitWriter()
    for value, width in fields:
        w.write(value, width)
    bits = w.getbits()
    assert bits.length == sum(width for _, width in fields)
    assert bits == concat(Bits(v, wd) for v, wd in fields)
    rd = BitReader(bits)
    assert [rd.read(width) for _, width in fields] == [v for v, _ in fields]
    assert rd.remaining == 0


def test_reader_past_end():
    with pytest.raises(FormatError):
        BitReader(Bits(1, 1)).read(2)


@pytest.mark.parametrize("width", [1, 3, 7, 8, 12, 31, 64])
@given(data=st.data())
def test_pack_words_matches_writer(width, data):
    words = data.draw(st.lists(st.integers(0, (1 << width) - 1), max_size=30))
    w = BitWriter()
    for x in words:
        w.write(x, width)
    packed = pack_words(words, width)
    assert packed == w.getbits()
    assert [int(x) for x in unpack_words(packed, width, len(words))] == words


def test_frame_roundtrip_and_errors():
    data = frame(0x02, 7, 3) + b"xyz"
    assert unframe(data, 0x02, 2) == ((7, 3), b"xyz")
    with pytest.raises(FormatError):
        unframe(data, 0x01, 2)
    with pytest.raises(FormatError):
        unframe(b"NOPE1" + data[5:], 0x02, 2)
