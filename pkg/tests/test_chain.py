from __future__ import annotations

import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from linempc.bits import FormatError
from linempc.chain import (
    CounterOverflow,
    InputVector,
    ParameterError,
    Parameters,
    pack_line_answer,
    pack_line_query,
    pack_simline_query,
    parse_input,
    query_x_field,
    read_input_file,
    simline_input_index,
    unpack_line_answer,
    unpack_line_query,
    unpack_simline_answer,
    unpack_simline_query,
    write_input_file,
)

P12 = Parameters(n=12, v=4, w=8, u=4)


def test_defaults():
    p = Parameters(n=24, v=8, w=16)
    assert p.u == 8 and p.s == 8 * (8 + 3) and p.c_bits == 8
    assert p.as_dict()["u"] == 8
    assert p.with_(q=4).q == 4


@pytest.mark.parametrize("i, x, r, expected", [
    (3, 0b1010, 0b0000, 0b0011_1010_0000),
    (1, 0, 0, 0b0001_0000_0000),
])
def test_line_query_layout(i, x, r, expected):
    assert pack_line_query(i, x, r, P12) == expected
    assert unpack_line_query(expected, P12) == (i, x, r)


def test_line_query_injective_exhaustive():
    words = {pack_line_query(i, x, r, P12) for i in range(1, 16) for x in range(16) for r in range(16)}
    assert len(words) == 15 * 16 * 16


def test_counter_overflow():
    with pytest.raises(CounterOverflow):
        pack_line_query(16, 0, 0, P12)
    with pytest.raises(CounterOverflow):
        pack_line_query(0, 0, 0, P12)


def test_line_answer_layout():
    a = 0b10_1100_101011
    assert unpack_line_answer(a, P12) == (2, 0b1100, 0b101011)
    assert unpack_line_answer(0, P12) == (0, 0, 0)
    assert pack_line_answer(2, 0b1100, 0b101011, P12) == a


def test_ell_uniform_exhaustive():
    counts = Counter(unpack_line_answer(a, P12)[0] for a in range(1 << 12))
    assert counts == {0: 1024, 1: 1024, 2: 1024, 3: 1024}


def test_ell_reduces_mod_v():
    p = Parameters(n=12, v=3, w=4, u=4)
    assert unpack_line_answer(0b11 << 10, p)[0] == 0


def test_simline_layout():
    assert pack_simline_query(0b1111, 0b0001, P12) == 0b1111_0001_0000
    assert unpack_simline_query(0, P12) == (0, 0)
    assert unpack_simline_answer(0, P12) == (0, 0)
    assert unpack_simline_answer(0b1010_11110000, P12) == (0b1010, 0b11110000)


@given(st.integers(0, 15), st.integers(0, 15))
def test_simline_roundtrip(x, r):
    word = pack_simline_query(x, r, P12)
    assert unpack_simline_query(word, P12) == (x, r)
    assert query_x_field(word, P12, "simline") == x


@pytest.mark.parametrize("i, expected", [(1, 0), (4, 3), (5, 0), (6, 1)])
def test_simline_input_index(i, expected):
    assert simline_input_index(i, P12) == expected


def test_parse_input():
    assert parse_input("AB", Parameters(n=12, v=2, w=1, u=4)).blocks == (0xA, 0xB)
    assert parse_input("FF", Parameters(n=24, v=1, w=1, u=8)).blocks == (0xFF,)
    p = Parameters(n=12, v=3, w=1, u=3)  # 9 bits: padded to 12 in hex
    assert parse_input("ff8", p).blocks == (7, 7, 7)
    assert parse_input(bytes([0xFF, 0x80]), p).blocks == (7, 7, 7)
    with pytest.raises(FormatError):
        parse_input("ff9", p)
    with pytest.raises(FormatError):
        parse_input("ff", p)
    with pytest.raises(FormatError):
        parse_input("ff80", p)
    with pytest.raises(FormatError):
        parse_input("zz", p)


@given(st.integers(1, 20), st.integers(1, 16), st.randoms(use_true_random=False))
def test_hex_roundtrip(v, u, rng):
    p = Parameters(n=max(2 * u, 2), v=v, w=1, u=u)
    X = InputVector.random(p, rng)
    assert parse_input(X.to_hex(), p) == X
    assert parse_input(X.to_bits().to_bytes(), p) == X


def test_input_file_roundtrip(tmp_path):
    p = Parameters(n=24, v=5, w=1, u=7)
    X = InputVector.random(p, random.Random(4))
    path = tmp_path / "x.bin"
    write_input_file(path, X)
    assert path.read_bytes()[:6] == b"LMPC1\x02"
    assert read_input_file(path) == X


@pytest.mark.parametrize("kwargs, func", [
    (dict(n=12, v=4, w=15, u=4), "line"),   # w+1 = 16 needs a 5-bit counter
    (dict(n=8, v=4, w=2, u=4), "line"),     # no room for ell
    (dict(n=12, v=4, w=2, u=7), "simline"),  # 2u > n
    (dict(n=12, v=0, w=2, u=4), "simline"),
    (dict(n=12, v=4, w=0, u=4), "simline"),
    (dict(n=12, v=4, w=2, u=4, s=3), "simline"),
    (dict(n=12, v=4, w=2, u=4, q=0), "simline"),
    (dict(n=12, v=4, w=2, u=4), "other"),
])
def test_invalid_parameters(kwargs, func):
    with pytest.raises(ParameterError):
        Parameters(**kwargs).validate(func)


def test_simline_has_no_counter_constraint():
    Parameters(n=12, v=8, w=16, u=4).validate("simline")


def test_enumerative_precondition():
    p = Parameters(n=48, v=4, w=8, u=16, q=8, d=2)
    assert p.enum_slack() == 16 - (4 * 2 + 3)
    p.validate("line", enumerative=True)
    assert p.h_enumerative() == p.s / 5 + 1
    with pytest.raises(ParameterError):
        Parameters(n=14, v=4, w=8, u=4, q=8).validate("line", enumerative=True)
    assert Parameters(n=14, v=4, w=8, u=4, q=8).h_enumerative() == float("inf")


def test_input_block_range():
    with pytest.raises(ValueError):
        InputVector((16,), 4)
