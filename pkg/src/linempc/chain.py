"""Line and SimLine: parameters, input parsing, and query/answer layouts.

Line query layout (MSB first, zero-padded on the right to n bits)::

    [ i : c_bits ][ x : u ][ r : u ]

SimLine query layout::

    [ x : u ][ r : u ][ 0 ... ]

Line answers split as ``[ ell_raw : ceil(log2 v) ][ r : u ][ z : rest ]`` with
``ell = ell_raw mod v``; SimLine answers split as ``[ r : u ][ z : rest ]``.
Chain indices are 1-based as in the recurrences; block indices are 0-based.
"""

from __future__ import annotations

import os
from random import Random
from dataclasses import asdict, dataclass, replace
from typing import Literal, NamedTuple

from .bits import SECTION_INPUT, Bits, FormatError, ceil_log2, fits, frame, pack_words, unframe, unpack_words

Func = Literal["line", "simline"]
FUNCS = ("line", "simline")


class ParameterError(ValueError):
    pass


class CounterOverflow(ValueError):
    pass


@dataclass(frozen=True)
class Parameters:
    n: int
    v: int
    w: int
    u: int | None = None
    m: int = 1
    s: int | None = None
    q: int = 1
    d: int = 2

    def __post_init__(self):
        if self.u is None:
            object.__setattr__(self, "u", self.n // 3)
        if self.s is None:
            object.__setattr__(self, "s", self.v * (self.u + ceil_log2(self.v)))

    @property
    def c_bits(self) -> int:
        return self.n - 2 * self.u

    @property
    def ell_bits(self) -> int:
        return ceil_log2(self.v)

    @property
    def q_bits(self) -> int:
        return ceil_log2(self.q)

    @property
    def z_bits_line(self) -> int:
        return self.n - self.ell_bits - self.u

    @property
    def z_bits_simline(self) -> int:
        return self.n - self.u

    @property
    def record_bits(self) -> int:
        """One stored input block with its index header."""
        return self.u + self.ell_bits

    def enum_slack(self) -> int:
        """u - ((d+2)*ceil(log v) + ceil(log q)); the enumerative bound needs this > 0."""
        return self.u - ((self.d + 2) * self.ell_bits + self.q_bits)

    def h_enumerative(self) -> float:
        """Threshold s/(u - (d+2)log v - log q) + 1 on the reachable-set size."""
        slack = self.enum_slack()
        if slack <= 0:
            return float("inf")
        return self.s / slack + 1

    def h_warmup(self) -> float:
        slack = self.u - self.q_bits - self.ell_bits
        if slack <= 0:
            return float("inf")
        return self.s / slack + 1

    def validate(self, func: Func = "line", enumerative: bool = False) -> Parameters:
        n, u, v, w = self.n, self.u, self.v, self.w
        problems = []
        if n < 1:
            problems.append("n must be positive")
        if u < 1:
            problems.append("u must be positive")
        if v < 1:
            problems.append("v must be at least 1")
        if w < 1:
            problems.append("w must be at least 1")
        if self.m < 1:
            problems.append("m must be at least 1")
        if self.q < 1:
            problems.append("q must be at least 1")
        if self.d < 1:
            problems.append("d must be at least 1")
        if self.s < u:
            problems.append(f"s={self.s} must be at least u={u}")
        if 2 * u > n:
            problems.append(f"2u={2 * u} exceeds n={n}")
        if func == "line":
            if 2 * u + self.ell_bits > n:
                problems.append(f"2u + ceil(log2 v) = {2 * u + self.ell_bits} exceeds n={n}")
            if w + 1 >= 1 << max(self.c_bits, 0):
                problems.append(f"w+1={w + 1} does not fit the {self.c_bits}-bit counter")
        elif func != "simline":
            problems.append(f"unknown function {func!r}")
        if enumerative and self.enum_slack() <= 0:
            problems.append(
                f"u={u} must exceed (d+2)*ceil(log2 v) + ceil(log2 q) = {u - self.enum_slack()}"
            )
        if problems:
            raise ParameterError("; ".join(problems))
        return self

    def with_(self, **changes) -> Parameters:
        return replace(self, **changes)

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


class NodeState(NamedTuple):
    """Values of chain node i: the block index used by its query, r, and z.

    For Line, ``ell`` is decoded from the previous answer; for SimLine it is
    the periodic block index of node i.
    """

    index: int
    ell: int
    r: int
    z: int


@dataclass(frozen=True)
class InputVector:
    blocks: tuple[int, ...]
    u: int

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        for b in self.blocks:
            if not fits(b, self.u):
                raise ValueError(f"block {b:#x} does not fit in {self.u} bits")

    @property
    def v(self) -> int:
        return len(self.blocks)

    def __getitem__(self, i: int) -> int:
        return self.blocks[i]

    def __len__(self) -> int:
        return len(self.blocks)

    def to_bits(self) -> Bits:
        return pack_words(self.blocks, self.u)

    def to_hex(self) -> str:
        bits = self.to_bits()
        nibbles = (bits.length + 3) // 4
        return format(bits.pad_to(nibbles * 4).value, f"0{nibbles}x") if nibbles else ""

    @classmethod
    def random(cls, p: Parameters, rng: Random) -> InputVector:
        return cls(tuple(rng.getrandbits(p.u) for _ in range(p.v)), p.u)


def node_one(p: Parameters) -> NodeState:
    return NodeState(1, 0, 0, 0)


def pack_line_query(i: int, x: int, r: int, p: Parameters) -> int:
    c = p.c_bits
    if not 1 <= i or not fits(i, c):
        raise CounterOverflow(f"chain index {i} does not fit the {c}-bit counter")
    if not (fits(x, p.u) and fits(r, p.u)):
        raise ValueError("x and r must fit in u bits")
    return (((i << p.u) | x) << p.u) | r


def unpack_line_query(word: int, p: Parameters) -> tuple[int, int, int]:
    u = p.u
    mask = (1 << u) - 1
    return word >> (2 * u), (word >> u) & mask, word & mask


def unpack_line_answer(a: int, p: Parameters) -> tuple[int, int, int]:
    if not fits(a, p.n):
        raise ValueError(f"answer does not fit in {p.n} bits")
    zb = p.z_bits_line
    ell_raw = a >> (p.u + zb)
    r = (a >> zb) & ((1 << p.u) - 1)
    z = a & ((1 << zb) - 1)
    return ell_raw % p.v, r, z


def pack_line_answer(ell_raw: int, r: int, z: int, p: Parameters) -> int:
    zb = p.z_bits_line
    if not (fits(ell_raw, p.ell_bits) and fits(r, p.u) and fits(z, zb)):
        raise ValueError("answer field out of range")
    return (((ell_raw << p.u) | r) << zb) | z


def pack_simline_query(x: int, r: int, p: Parameters) -> int:
    if not (fits(x, p.u) and fits(r, p.u)):
        raise ValueError("x and r must fit in u bits")
    return ((x << p.u) | r) << (p.n - 2 * p.u)


def unpack_simline_query(word: int, p: Parameters) -> tuple[int, int]:
    pad = p.n - 2 * p.u
    mask = (1 << p.u) - 1
    return (word >> (pad + p.u)) & mask, (word >> pad) & mask


def unpack_simline_answer(a: int, p: Parameters) -> tuple[int, int]:
    if not fits(a, p.n):
        raise ValueError(f"answer does not fit in {p.n} bits")
    zb = p.z_bits_simline
    return a >> zb, a & ((1 << zb) - 1)


def simline_input_index(i: int, p: Parameters) -> int:
    return (i - 1) % p.v


def query_x_field(word: int, p: Parameters, func: Func) -> int:
    """The input block embedded in a packed query word."""
    if func == "line":
        return unpack_line_query(word, p)[1]
    return unpack_simline_query(word, p)[0]


def parse_input(raw: str | bytes, p: Parameters) -> InputVector:
    """Parse v u-bit blocks from a hex string (or raw bytes), MSB first.

    Bits past the v*u payload are tolerated only as zero padding up to the
    next hex digit or byte; anything beyond that is a length mismatch.
    """
    need = p.v * p.u
    if isinstance(raw, str):
        text = raw.strip().lower().removeprefix("0x")
        try:
            value = int(text, 16) if text else 0
        except ValueError as exc:
            raise FormatError(f"not a hex string: {raw!r}") from exc
        have = 4 * len(text)
        slack = 3
    else:
        value = int.from_bytes(raw, "big")
        have = 8 * len(raw)
        slack = 7
    if have < need or have - need > slack:
        raise FormatError(f"input carries {have} bits, expected {need}")
    bits = Bits(value, have)
    if bits.slice(need, have - need).value:
        raise FormatError("nonzero bits after the last block")
    return InputVector(tuple(int(b) for b in unpack_words(bits, p.u, p.v)), p.u)


def write_input_file(path: str | os.PathLike, X: InputVector) -> None:
    with open(path, "wb") as fh:
        fh.write(frame(SECTION_INPUT, X.v, X.u) + X.to_bits().to_bytes())


def read_input_file(path: str | os.PathLike) -> InputVector:
    with open(path, "rb") as fh:
        data = fh.read()
    (v, u), body = unframe(data, SECTION_INPUT, 2)
    bits = Bits.from_bytes(body, v * u)
    return InputVector(tuple(int(b) for b in unpack_words(bits, u, v)), u)
