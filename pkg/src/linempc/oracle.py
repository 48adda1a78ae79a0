"""Seeded stand-in for a random oracle {0,1}^n -> {0,1}^n.

The base function is ``blake2b`` keyed with a 32-byte seed over the query
word, truncated to its first ``n`` bits. "lazy" and "keyed-hash" modes are
the same computation; "eager" materializes the whole table up front so it can
be dumped into codec payloads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Hashable, Mapping, NamedTuple

import numpy as np

from .bits import SECTION_TABLE, Bits, FormatError, frame, pack_words, unframe, unpack_words

SEED_BYTES = 32
MAX_EAGER_N = 22
MAX_N = 512
MODES = ("lazy", "eager", "keyed-hash")


class OracleError(ValueError):
    pass


class WidthMismatch(OracleError):
    pass


class ModeUnsupported(OracleError):
    pass


class QueryRecord(NamedTuple):
    tag: Hashable
    round: int | None
    word: int


def parse_seed(text: str) -> bytes:
    text = text.strip().lower().removeprefix("0x")
    if len(text) != 2 * SEED_BYTES:
        raise ValueError(f"seed must be {2 * SEED_BYTES} hex characters, got {len(text)}")
    return bytes.fromhex(text)


def seed_from_int(i: int) -> bytes:
    return i.to_bytes(SEED_BYTES, "big")


def derive_seed(master: bytes, *labels: int | str) -> bytes:
    """Sub-seed = keyed hash of the master seed over the given labels."""
    h = hashlib.blake2b(key=master, digest_size=SEED_BYTES)
    for label in labels:
        h.update(str(label).encode() + b"\x00")
    return h.digest()


def keyed_hash_word(seed: bytes, x: int, n: int) -> int:
    """First ``n`` bits of blake2b(key=seed) over ``x`` as a big-endian word."""
    digest_size = 32 if n <= 256 else 64
    msg = x.to_bytes((n + 7) // 8, "big")
    digest = hashlib.blake2b(msg, key=seed, digest_size=digest_size).digest()
    return int.from_bytes(digest, "big") >> (8 * digest_size - n)


@dataclass
class Oracle:
    """Oracle handle: base function plus a patch overlay and a query log.

    ``answer`` is the pure lookup; ``query`` is the same lookup with an
    entry appended to ``query_log``.
    """

    n: int
    seed: bytes | None = None
    mode: str = "lazy"
    patches: Mapping[int, int] | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= self.n <= MAX_N:
            raise OracleError(f"oracle width must be in 1..{MAX_N}")
        if self.mode not in MODES:
            raise OracleError(f"unknown mode {self.mode!r}")
        if self.seed is None and self.table is None:
            raise OracleError("oracle needs a seed or an explicit table")
        if self.seed is not None and len(self.seed) != SEED_BYTES:
            raise OracleError(f"seed must be {SEED_BYTES} bytes")
        if self.mode == "eager":
            if self.n > MAX_EAGER_N:
                raise ModeUnsupported(f"eager mode needs n <= {MAX_EAGER_N}")
            if self.table is None:
                self.table = self._build_table()
        self.patches = dict(self.patches or {})
        self.query_log: list[QueryRecord] = []
        self._mask = (1 << self.n) - 1

    @classmethod
    def from_table(cls, table, n: int) -> Oracle:
        arr = np.asarray(table, dtype=np.uint64)
        if arr.shape != (1 << n,):
            raise OracleError(f"table for n={n} must have {1 << n} entries")
        if n > MAX_EAGER_N:
            raise ModeUnsupported(f"explicit tables need n <= {MAX_EAGER_N}")
        return cls(n=n, mode="eager", table=arr)

    def _build_table(self) -> np.ndarray:
        n, seed = self.n, self.seed
        return np.fromiter((keyed_hash_word(seed, x, n) for x in range(1 << n)),
                           dtype=np.uint64, count=1 << n)

    def _check(self, x: int) -> None:
        if not 0 <= x <= self._mask:
            raise WidthMismatch(f"query {x:#x} does not fit in {self.n} bits")

    def base(self, x: int) -> int:
        self._check(x)
        if self.table is not None:
            return int(self.table[x])
        return keyed_hash_word(self.seed, x, self.n)

    def answer(self, x: int) -> int:
        self._check(x)
        hit = self.patches.get(x)
        if hit is not None:
            return hit
        return self.base(x)

    def query(self, x: int, tag: Hashable = None, round: int | None = None) -> int:
        a = self.answer(x)
        self.query_log.append(QueryRecord(tag, round, x))
        return a

    def patch(self, entries: Mapping[int, int]) -> Oracle:
        """New handle over the same base with ``entries`` overlaid (last write wins)."""
        for k, val in entries.items():
            self._check(k)
            self._check(val)
        merged = dict(self.patches)
        merged.update(entries)
        return Oracle(n=self.n, seed=self.seed, mode=self.mode, patches=merged, table=self.table)

    def eager(self) -> Oracle:
        if self.mode == "eager":
            return self
        return Oracle(n=self.n, seed=self.seed, mode="eager", patches=self.patches)

    def log_for(self, tag: Hashable) -> list[int]:
        return [r.word for r in self.query_log if r.tag == tag]

    def dump_table(self) -> np.ndarray:
        if self.table is None:
            if self.n > MAX_EAGER_N:
                raise ModeUnsupported(f"cannot dump a lazy oracle with n > {MAX_EAGER_N}")
            table = self._build_table()
        else:
            table = self.table.copy()
        for k, val in self.patches.items():
            table[k] = val
        return table


def table_bits(table: np.ndarray, n: int) -> Bits:
    """Bit-pack a table: entry i at offset i*n, MSB-first."""
    return pack_words(table, n)


def restore_table(bits: Bits, n: int) -> Oracle:
    return Oracle.from_table(unpack_words(bits, n, 1 << n), n)


def write_table_file(path, oracle: Oracle) -> None:
    table = oracle.dump_table()
    with open(path, "wb") as fh:
        fh.write(frame(SECTION_TABLE, oracle.n) + table_bits(table, oracle.n).to_bytes())


def read_table_file(path) -> Oracle:
    with open(path, "rb") as fh:
        data = fh.read()
    (n,), body = unframe(data, SECTION_TABLE, 1)
    if n > MAX_EAGER_N:
        raise FormatError(f"table width {n} exceeds {MAX_EAGER_N}")
    return restore_table(Bits.from_bytes(body, n << n), n)
