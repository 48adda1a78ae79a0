"""Fixed-length bit strings backed by Python integers.

Bits are MSB-first: ``Bits(0b101, 3)`` is the string ``101``. All packing in
the package (oracle queries, machine memories, codec sections, file
payloads) goes through this module so bit order is defined in one place.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"LMPC1"
SECTION_TABLE = 0x01
SECTION_INPUT = 0x02
SECTION_BLOB = 0x03


class FormatError(ValueError):
    """Raised when a file or bit payload does not match its declared layout."""


def ceil_log2(x: int) -> int:
    """Bits needed to index ``x`` distinct values (0 for x <= 1)."""
    if x <= 1:
        return 0
    return (x - 1).bit_length()


def fits(value: int, width: int) -> bool:
    return 0 <= value < (1 << width)


@dataclass(frozen=True)
class Bits:
    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative bit length")
        if not fits(self.value, self.length):
            raise ValueError(f"value {self.value:#x} does not fit in {self.length} bits")

    @classmethod
    def empty(cls) -> Bits:
        return cls(0, 0)

    @classmethod
    def from_str(cls, s: str) -> Bits:
        return cls(int(s, 2) if s else 0, len(s))

    def __len__(self) -> int:
        return self.length

    def __add__(self, other: Bits) -> Bits:
        return Bits((self.value << other.length) | other.value, self.length + other.length)

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def slice(self, start: int, length: int) -> Bits:
        if start < 0 or start + length > self.length:
            raise IndexError("bit slice out of range")
        shift = self.length - start - length
        return Bits((self.value >> shift) & ((1 << length) - 1), length)

    def pad_to(self, length: int) -> Bits:
        """Right-pad with zeros."""
        if length < self.length:
            raise ValueError("cannot pad to a shorter length")
        return Bits(self.value << (length - self.length), length)

    def to_bytes(self) -> bytes:
        """Pack into bytes, zero-padding the final byte on the right."""
        nbytes = (self.length + 7) // 8
        return self.pad_to(nbytes * 8).value.to_bytes(nbytes, "big")

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> Bits:
        full = cls(int.from_bytes(data, "big"), len(data) * 8)
        if length is None:
            return full
        if length > full.length:
            raise FormatError(f"need {length} bits, have {full.length}")
        return full.slice(0, length)


def concat(parts: Iterable[Bits]) -> Bits:
    out = Bits.empty()
    for part in parts:
        out = out + part
    return out


class BitWriter:
    """Append-only builder; cheaper than repeated ``Bits.__add__``."""

    def __init__(self):
        self._chunks: list[str] = []
        self.length = 0

    def write(self, value: int, width: int) -> None:
        if not fits(value, width):
            raise ValueError(f"value {value} does not fit in {width} bits")
        if width:
            self._chunks.append(format(value, f"0{width}b"))
            self.length += width

    def write_bits(self, bits: Bits) -> None:
        self.write(bits.value, bits.length)

    def getbits(self) -> Bits:
        return Bits.from_str("".join(self._chunks))


class BitReader:
    def __init__(self, bits: Bits):
        self.bits = bits
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self.bits.length - self.pos

    def read(self, width: int) -> int:
        if width > self.remaining:
            raise FormatError(f"read of {width} bits past end ({self.remaining} left)")
        out = self.bits.slice(self.pos, width).value
        self.pos += width
        return out

    def read_bits(self, width: int) -> Bits:
        return Bits(self.read(width), width)


def pack_words(words: Sequence[int] | np.ndarray, width: int) -> Bits:
    """Concatenate fixed-width words, word 0 first, each MSB-first."""
    arr = np.asarray(words, dtype=np.uint64)
    if arr.size == 0 or width == 0:
        return Bits(0, 0)
    if width > 64:
        w = BitWriter()
        for x in words:
            w.write(int(x), width)
        return w.getbits()
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bitmat = ((arr[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    nbits = bitmat.size
    packed = np.packbits(bitmat.ravel()).tobytes()
    return Bits.from_bytes(packed, nbits)


def unpack_words(bits: Bits, width: int, count: int) -> np.ndarray:
    if width * count > bits.length:
        raise FormatError(f"need {width * count} bits, have {bits.length}")
    if count == 0 or width == 0:
        return np.zeros(count, dtype=np.uint64)
    if width > 64:
        raise ValueError("unpack_words supports widths up to 64")
    body = bits.slice(0, width * count)
    raw = np.frombuffer(body.to_bytes(), dtype=np.uint8)
    flat = np.unpackbits(raw)[: width * count].reshape(count, width).astype(np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (flat << shifts).sum(axis=1, dtype=np.uint64)


def frame(section_id: int, *u32_fields: int) -> bytes:
    return MAGIC + bytes([section_id]) + b"".join(struct.pack("<I", f) for f in u32_fields)


def unframe(data: bytes, section_id: int, n_fields: int) -> tuple[tuple[int, ...], bytes]:
    head = len(MAGIC) + 1 + 4 * n_fields
    if len(data) < head or data[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic")
    if data[len(MAGIC)] != section_id:
        raise FormatError(f"expected section id {section_id:#04x}, got {data[len(MAGIC)]:#04x}")
    fields = struct.unpack("<" + "I" * n_fields, data[len(MAGIC) + 1 : head])
    return fields, data[head:]
