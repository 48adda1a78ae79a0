"""Runnable compression-argument codecs over (oracle table, input X).

Both codecs encode an eager oracle table and an input vector using one
machine's round-start memory M and a replay of that machine's round:

* warm-up: input blocks that appear in the replayed queries as correct chain
  entries are stored as (query index, block index) instead of u raw bits.
* enumerative (Line): the round is replayed against every patched oracle
  that forces the next d block indices to a chosen sequence; blocks the
  machine reveals in any replay are stored as pointers into that replay.

Bit accounting separates payload bits (the terms of the length bounds) from
header bits (framing, lengths, counts, continuation flags, frontier context).
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .bits import MAGIC, SECTION_BLOB, BitReader, BitWriter, Bits, FormatError, ceil_log2
from .chain import (
    Func,
    InputVector,
    NodeState,
    Parameters,
    pack_line_answer,
    pack_line_query,
    query_x_field,
    unpack_line_answer,
    unpack_line_query,
)
from .mpc_engine import MachineEnvelope, RunReport, Strategy, Tape, machine_memory_at, replay_step
from .oracle import MAX_EAGER_N, ModeUnsupported, Oracle, restore_table, table_bits
from .ram_eval import chain_trace, node_query

SCHEME_WARMUP = 0x01
SCHEME_ENUM = 0x02
DEFAULT_ENUM_CAP = 1 << 12

SECTION_IDS = {
    "table": 1,
    "mem_len": 2,
    "memory": 3,
    "count": 4,
    "records": 5,
    "rest": 6,
    "frontier": 7,
}
SECTION_NAMES = {v: k for k, v in SECTION_IDS.items()}


class CodecError(Exception):
    pass


class NoIntersection(CodecError):
    """The instance has fewer than alpha recoverable entries (outside F)."""


class PreconditionFailed(CodecError):
    """A jump happened (or the frontier leaves no room for depth d)."""


class EnumerationCapExceeded(CodecError):
    pass


class DecodeError(CodecError):
    pass


class InjectivityError(CodecError):
    def __init__(self, a, b, code):
        super().__init__(f"messages {a!r} and {b!r} share the encoding {code}")
        self.pair = (a, b)


# ----------------------------------------------------------------------------
# blobs


@dataclass
class Section:
    name: str
    bits: Bits
    header_bits: int = 0

    @property
    def payload_bits(self) -> int:
        return self.bits.length - self.header_bits


FRAME_FIXED_BYTES = len(MAGIC) + 3  # magic, section id, scheme, section count
FRAME_PER_SECTION_BYTES = 5  # u8 id, u32 bit length


@dataclass
class EncodingBlob:
    scheme: int
    sections: list[Section]

    def section(self, name: str) -> Section:
        for sec in self.sections:
            if sec.name == name:
                return sec
        raise KeyError(name)

    @property
    def framing_bits(self) -> int:
        return 8 * (FRAME_FIXED_BYTES + FRAME_PER_SECTION_BYTES * len(self.sections))

    @property
    def payload_bits(self) -> int:
        return sum(sec.payload_bits for sec in self.sections)

    @property
    def header_bits(self) -> int:
        return self.framing_bits + sum(sec.header_bits for sec in self.sections)

    @property
    def total_bits(self) -> int:
        return self.payload_bits + self.header_bits

    def stream(self) -> Bits:
        """All section bits back to back (the unframed encoding)."""
        w = BitWriter()
        for sec in self.sections:
            w.write_bits(sec.bits)
        return w.getbits()

    def to_bytes(self) -> bytes:
        head = bytearray(MAGIC + bytes([SECTION_BLOB, self.scheme, len(self.sections)]))
        for sec in self.sections:
            head += bytes([SECTION_IDS[sec.name]]) + struct.pack("<I", sec.bits.length)
        return bytes(head) + self.stream().to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> EncodingBlob:
        if data[: len(MAGIC)] != MAGIC or len(data) < FRAME_FIXED_BYTES:
            raise FormatError("bad magic")
        if data[len(MAGIC)] != SECTION_BLOB:
            raise FormatError("not a codec blob")
        scheme, count = data[len(MAGIC) + 1], data[len(MAGIC) + 2]
        pos = FRAME_FIXED_BYTES
        layout = []
        for _ in range(count):
            sid = data[pos]
            (length,) = struct.unpack("<I", data[pos + 1 : pos + 5])
            layout.append((SECTION_NAMES[sid], length))
            pos += FRAME_PER_SECTION_BYTES
        total = sum(length for _, length in layout)
        rd = BitReader(Bits.from_bytes(data[pos:], total))
        sections = [Section(name, rd.read_bits(length)) for name, length in layout]
        blob = cls(scheme, sections)
        _restore_header_split(blob)
        return blob


def _restore_header_split(blob: EncodingBlob) -> None:
    """Recover each section's header/payload split from the blob's own fields."""
    for sec in blob.sections:
        if sec.name in ("mem_len", "count", "frontier"):
            sec.header_bits = sec.bits.length
    # The enumerative record stream mixes header and payload bits; its split
    # needs the parameters and is restored by decode_enumerative.


# ----------------------------------------------------------------------------
# machine-round context


@dataclass
class MachineRound:
    """One machine's round: A1 = everything before it, A2 = its step."""

    p: Parameters
    strategy: Strategy
    machine: int
    round: int
    func: Func
    tape_seed: bytes

    def capture(self, oracle: Oracle, X: InputVector) -> tuple[Bits, RunReport]:
        mem, report = machine_memory_at(self.p, self.strategy, X, oracle, self.machine, self.round,
                                        self.func, self.tape_seed)
        if mem.length > self.p.s:
            raise CodecError(f"memory of {mem.length} bits exceeds s={self.p.s}")
        return mem, report

    def replay(self, memory: Bits, answer: Callable[[int], int]) -> list[int]:
        env = MachineEnvelope(self.machine, self.round, memory)
        queries, _, _ = replay_step(self.strategy, env, answer, self.p.q, Tape(self.tape_seed))
        return queries


def frontier_index(report: RunReport, round: int, chain_words: Sequence[int]) -> int:
    """Largest chain index whose correct entry was queried before ``round``."""
    queried = {x for _, _, x in report.queries_before(round)}
    best = 0
    for idx, word in enumerate(chain_words, start=1):
        if word in queried:
            best = idx
    return best


def _check_eager(oracle: Oracle) -> None:
    if oracle.n > MAX_EAGER_N:
        raise ModeUnsupported(f"codecs need an eager oracle (n <= {MAX_EAGER_N})")


def _memory_sections(p: Parameters, memory: Bits) -> list[Section]:
    width = p.s.bit_length()
    return [
        Section("mem_len", Bits(memory.length, width), header_bits=width),
        Section("memory", memory.pad_to(p.s)),
    ]


def _read_memory(blob: EncodingBlob) -> Bits:
    return blob.section("memory").bits.slice(0, blob.section("mem_len").bits.value)


def _rest_section(X: InputVector, recovered: Iterable[int], p: Parameters) -> Section:
    keep = set(recovered)
    w = BitWriter()
    for j in range(p.v):
        if j not in keep:
            w.write(X[j], p.u)
    return Section("rest", w.getbits())


def _fill_rest(blob: EncodingBlob, known: dict[int, int], p: Parameters, recovered: set[int]) -> None:
    rd = BitReader(blob.section("rest").bits)
    for j in range(p.v):
        if j not in recovered:
            known[j] = rd.read(p.u)
    if rd.remaining:
        raise DecodeError("trailing bits in the raw-block section")


@dataclass
class DecodeResult:
    table: np.ndarray
    X: InputVector
    replays: list[list[int]] = field(default_factory=list)
    sequences: list[tuple[int, ...]] = field(default_factory=list)


# ----------------------------------------------------------------------------
# warm-up codec


def warmup_bound(p: Parameters, intersect: int, table_n: int | None = None) -> int:
    """s + I*(ceil log q + ceil log v) + (v - I)*u + n*2^n."""
    n = p.n if table_n is None else table_n
    return p.s + intersect * (p.q_bits + p.ell_bits) + (p.v - intersect) * p.u + n * (1 << n)


@dataclass
class WarmupEncoding:
    blob: EncodingBlob
    intersect: int
    queries: list[int]
    frontier: int


def default_target_positions(p: Parameters, frontier: int) -> list[int]:
    """The v positions after the frontier (one per block for SimLine)."""
    return list(range(frontier + 1, min(frontier + p.v, p.w) + 1))


def encode_warmup(oracle: Oracle, X: InputVector, ctx: MachineRound, alpha: int = 0,
                  positions: Sequence[int] | None = None) -> WarmupEncoding:
    """Encode (table, X); raise NoIntersection if fewer than alpha targets are queried."""
    p = ctx.p
    _check_eager(oracle)
    table = oracle.dump_table()
    memory, report = ctx.capture(oracle, X)
    nodes = chain_trace(ctx.func, p, oracle, X)
    chain_words = [node_query(ctx.func, node, X, p) for node in nodes[:-1]]
    frontier = frontier_index(report, ctx.round, chain_words)
    if positions is None:
        positions = default_target_positions(p, frontier)

    queries = ctx.replay(memory, oracle.answer)
    first_index: dict[int, int] = {}
    for idx, word in enumerate(queries):
        first_index.setdefault(word, idx)

    records: list[tuple[int, int]] = []
    seen_blocks: set[int] = set()
    for pos in positions:
        word = chain_words[pos - 1]
        block = nodes[pos - 1].ell
        if word in first_index and block not in seen_blocks:
            records.append((first_index[word], block))
            seen_blocks.add(block)
    if len(records) < alpha:
        raise NoIntersection(f"|Q n C| = {len(records)} < alpha = {alpha}")

    count_width = ceil_log2(p.q + 1)
    rec = BitWriter()
    for idx, block in records:
        rec.write(idx, p.q_bits)
        rec.write(block, p.ell_bits)
    sections = [Section("table", table_bits(table, oracle.n))]
    sections += _memory_sections(p, memory)
    sections += [
        Section("count", Bits(len(records), count_width), header_bits=count_width),
        Section("records", rec.getbits()),
        _rest_section(X, seen_blocks, p),
    ]
    blob = EncodingBlob(SCHEME_WARMUP, sections)
    expected = (oracle.n << oracle.n) + p.s + len(records) * (p.q_bits + p.ell_bits) + (p.v - len(records)) * p.u
    assert blob.payload_bits == expected, (blob.payload_bits, expected)
    return WarmupEncoding(blob, len(records), queries, frontier)


def decode_warmup(blob: EncodingBlob, ctx: MachineRound, n: int) -> DecodeResult:
    p = ctx.p
    table_oracle = restore_table(blob.section("table").bits, n)
    memory = _read_memory(blob)
    queries = ctx.replay(memory, table_oracle.answer)
    count = blob.section("count").bits.value
    rd = BitReader(blob.section("records").bits)
    known: dict[int, int] = {}
    for _ in range(count):
        idx, block = rd.read(p.q_bits), rd.read(p.ell_bits)
        if idx >= len(queries):
            raise DecodeError(f"record points at query {idx}, replay issued {len(queries)}")
        known[block] = query_x_field(queries[idx], p, ctx.func)
    _fill_rest(blob, known, p, set(known))
    return DecodeResult(table_oracle.table, InputVector(tuple(known[j] for j in range(p.v)), p.u), [queries])


# ----------------------------------------------------------------------------
# patched oracles, guessable sets, reachable sets (Line)


@dataclass
class PatchedChain:
    oracle: Oracle
    words: list[int | None]  # q_0..q_d: the depth-t chain query under the patch
    blocks: list[int | None]  # a_0..a_d; depth 0 is absent when the frontier is 0


def check_patch_room(p: Parameters, frontier: int, d: int) -> None:
    if frontier + d > p.w:
        raise PreconditionFailed(f"frontier {frontier} + depth {d} runs past w={p.w}")


def build_patched_oracle(base: Oracle, X: InputVector, p: Parameters, frontier: int,
                         seq: Sequence[int], nodes: Sequence[NodeState] | None = None) -> PatchedChain:
    """Force the block indices after the frontier entry to follow ``seq``.

    With a_0 the block of frontier node j and r'_j its r, the entry
    (j+t-1, x_{a_{t-1}}, r'_{j+t-1}) is overwritten for t = 1..d so its answer
    decodes to a_t, keeping the base answer's r and z fields. When j = 0 there
    is no entry before node 1 (whose block and r are fixed at 0), so depth 1
    starts at (1, x_{a_1}, 0) and only d-1 entries are patched.
    """
    d = len(seq)
    if any(not 0 <= a < p.v for a in seq):
        raise ValueError("sequence entries must be block indices")
    check_patch_room(p, frontier, d)
    if nodes is None:
        nodes = chain_trace("line", p, base, X)
    blocks: list[int | None]
    words: list[int | None]
    if frontier == 0:
        blocks, words, first, r = [None, *seq], [None], 1, 0
    else:
        node = nodes[frontier - 1]
        blocks, words, first, r = [node.ell, *seq], [], 0, node.r
    patches: dict[int, int] = {}
    for t in range(first, d + 1):
        word = pack_line_query(frontier + t, X[blocks[t]], r, p)
        words.append(word)
        if t < d:
            _, r, z = unpack_line_answer(base.answer(word), p)
            patches[word] = pack_line_answer(blocks[t + 1], r, z, p)
    return PatchedChain(base.patch(patches), words, blocks)


@dataclass
class GuessableSet:
    anchor: int
    d: int
    entries: set[tuple[int, int, int | None]]  # (position, word, predecessor word)


def guessable_set(base: Oracle, X: InputVector, p: Parameters, anchor: int, d: int,
                  nodes: Sequence[NodeState] | None = None) -> GuessableSet:
    """Entries reachable from the anchor's successor along any d block indices."""
    if nodes is None:
        nodes = chain_trace("line", p, base, X)
    succ = nodes[anchor]  # node anchor+1
    first = pack_line_query(anchor + 1, X[succ.ell], succ.r, p)
    pred0 = pack_line_query(anchor, X[nodes[anchor - 1].ell], nodes[anchor - 1].r, p) if anchor >= 1 else None
    entries = {(anchor + 1, first, pred0)}
    for seq in itertools.product(range(p.v), repeat=d):
        prev = first
        for b, a in enumerate(seq, start=1):
            pos = anchor + b + 1
            if pos > p.w:
                break
            _, r, _ = unpack_line_answer(base.answer(prev), p)
            word = pack_line_query(pos, X[a], r, p)
            entries.add((pos, word, prev))
            prev = word
    return GuessableSet(anchor, d, entries)


def find_jump(report: RunReport, through_round: int, base: Oracle, X: InputVector, p: Parameters,
              d: int, nodes: Sequence[NodeState] | None = None) -> tuple[int, int, int] | None:
    """First query (round, machine, word) hitting a guessable entry before its predecessor."""
    if nodes is None:
        nodes = chain_trace("line", p, base, X)
    # A word can sit in several guessable sets; it is a jump only if none of
    # its predecessors was queried earlier (node 1 has no predecessor).
    predecessors: dict[int, set[int | None]] = {}
    for j in range(0, p.w):
        for _, word, pred in guessable_set(base, X, p, j, d, nodes).entries:
            predecessors.setdefault(word, set()).add(pred)
    queried: set[int] = set()
    for rnd, machine, word in report.queries_before(through_round + 1):
        preds = predecessors.get(word)
        if preds is not None and None not in preds and not (preds & queried):
            return rnd, machine, word
        queried.add(word)
    return None


@dataclass
class ReachableSet:
    machine: int
    round: int
    frontier: int
    d: int
    members: set[int]


@dataclass
class _EnumContext:
    memory: Bits
    report: RunReport
    nodes: list[NodeState]
    frontier: int


def _prepare_enum(oracle: Oracle, X: InputVector, ctx: MachineRound, d: int, cap: int) -> _EnumContext:
    p = ctx.p
    if ctx.func != "line":
        raise ValueError("the enumerative codec is defined for Line")
    if p.v ** d > cap:
        raise EnumerationCapExceeded(f"v^d = {p.v ** d} exceeds cap {cap}")
    memory, report = ctx.capture(oracle, X)
    nodes = chain_trace("line", p, oracle, X)
    chain_words = [node_query("line", node, X, p) for node in nodes[:-1]]
    frontier = frontier_index(report, ctx.round, chain_words)
    check_patch_room(p, frontier, d)
    jump = find_jump(report, ctx.round, oracle, X, p, d, nodes)
    if jump is not None:
        raise PreconditionFailed(f"jump: round {jump[0]} machine {jump[1]} queried {jump[2]:#x} early")
    return _EnumContext(memory, report, nodes, frontier)


def _sequence_replays(oracle: Oracle, X: InputVector, ctx: MachineRound, d: int, prep: _EnumContext):
    for seq in itertools.product(range(ctx.p.v), repeat=d):
        chain = build_patched_oracle(oracle, X, ctx.p, prep.frontier, seq, prep.nodes)
        yield seq, chain, ctx.replay(prep.memory, chain.oracle.answer)


def compute_reachable_set(oracle: Oracle, X: InputVector, ctx: MachineRound, d: int | None = None,
                          cap: int = DEFAULT_ENUM_CAP) -> ReachableSet:
    """Blocks a such that some patched replay issues the depth-t chain query holding x_a.

    Depths run 0..d; depth 0 is the frontier entry itself (absent for frontier 0).
    """
    d = ctx.p.d if d is None else d
    prep = _prepare_enum(oracle, X, ctx, d, cap)
    members: set[int] = set()
    for _, chain, queries in _sequence_replays(oracle, X, ctx, d, prep):
        issued = set(queries)
        members.update(a for word, a in zip(chain.words, chain.blocks) if word is not None and word in issued)
    return ReachableSet(ctx.machine, ctx.round, prep.frontier, d, members)


# ----------------------------------------------------------------------------
# enumerative codec


def enumerative_bound(p: Parameters, reachable: int, d: int | None = None, table_n: int | None = None) -> int:
    """s + |B|((d+2) ceil log v + ceil log q) + (v - |B|) u + n 2^n."""
    d = p.d if d is None else d
    n = p.n if table_n is None else table_n
    return (p.s + reachable * ((d + 2) * p.ell_bits + p.q_bits) + (p.v - reachable) * p.u
            + n * (1 << n))


@dataclass
class EnumEncoding:
    blob: EncodingBlob
    recovered: list[tuple[tuple[int, ...], int, int]]  # (sequence, query index, block)
    replays: dict[tuple[int, ...], list[int]]  # every sequence's replay, lexicographic
    frontier: int
    d: int


def _enum_count_width(d: int) -> int:
    return ceil_log2(d + 2)


def encode_enumerative(oracle: Oracle, X: InputVector, ctx: MachineRound, d: int | None = None,
                       cap: int = DEFAULT_ENUM_CAP) -> EnumEncoding:
    p = ctx.p
    d = p.d if d is None else d
    _check_eager(oracle)
    prep = _prepare_enum(oracle, X, ctx, d, cap)
    table = oracle.dump_table()

    recorded: set[int] = set()
    recovered = []
    replays = {}
    body = BitWriter()
    header = 0
    count_width = _enum_count_width(d)
    for seq, chain, queries in _sequence_replays(oracle, X, ctx, d, prep):
        replays[seq] = queries
        first_index: dict[int, int] = {}
        for idx, word in enumerate(queries):
            first_index.setdefault(word, idx)
        # a block may sit at several depths; record it where the replay first meets it
        earliest: dict[int, int] = {}
        for word, a in zip(chain.words, chain.blocks):
            if word is not None and word in first_index and a not in recorded:
                earliest[a] = min(earliest.get(a, first_index[word]), first_index[word])
        fresh = sorted((idx, a) for a, idx in earliest.items())
        recorded.update(earliest)
        if not fresh:
            continue
        body.write(1, 1)
        for a in seq:
            body.write(a, p.ell_bits)
        body.write(len(fresh), count_width)
        header += 1 + count_width
        for idx, a in fresh:
            body.write(idx, p.q_bits)
            body.write(a, p.ell_bits)
            recovered.append((seq, idx, a))
    body.write(0, 1)
    header += 1

    start = prep.nodes[prep.frontier - 1] if prep.frontier else None
    fr = BitWriter()
    fr.write(prep.frontier, p.c_bits)
    fr.write(start.ell if start else 0, p.ell_bits)
    fr.write(start.r if start else 0, p.u)
    # r'_{j+1} is the true r of node j+1 under every sequence; carrying it lets the
    # decoder place depth-1 queries before block a_0 is known
    fr.write(prep.nodes[prep.frontier].r if start else 0, p.u)

    sections = [Section("table", table_bits(table, oracle.n))]
    sections += _memory_sections(p, prep.memory)
    sections += [
        Section("frontier", fr.getbits(), header_bits=fr.length),
        Section("records", body.getbits(), header_bits=header),
        _rest_section(X, recorded, p),
    ]
    blob = EncodingBlob(SCHEME_ENUM, sections)
    n_seq = len({seq for seq, _, _ in recovered})
    expected = ((oracle.n << oracle.n) + p.s + n_seq * d * p.ell_bits
                + len(recovered) * (p.q_bits + p.ell_bits) + (p.v - len(recovered)) * p.u)
    assert blob.payload_bits == expected, (blob.payload_bits, expected)
    return EnumEncoding(blob, recovered, replays, prep.frontier, d)


def _parse_enum_records(blob: EncodingBlob, p: Parameters, d: int):
    rd = BitReader(blob.section("records").bits)
    count_width = _enum_count_width(d)
    out = []
    while rd.read(1):
        seq = tuple(rd.read(p.ell_bits) for _ in range(d))
        count = rd.read(count_width)
        out.append((seq, [(rd.read(p.q_bits), rd.read(p.ell_bits)) for _ in range(count)]))
    if rd.remaining:
        raise DecodeError("trailing bits after the record terminator")
    return out


class _DecodingOracle:
    """Answers a replay the way the patched oracle would, learning X as it goes.

    A query is recognized as the depth-t patched entry when it matches the
    expected word computed from blocks already known, or when the record
    stream says this query index carries a new block.
    """

    def __init__(self, table: Oracle, p: Parameters, frontier: int, blocks: Sequence[int], r0: int,
                 r1: int, known: dict[int, int], records: dict[int, int]):
        self.table = table
        self.p = p
        self.frontier = frontier
        self.blocks = list(blocks)
        self.d = len(blocks) - 1
        self.known = known
        self.records = records
        # Frontier 0 has no depth-0 entry; node 1 fixes r'_1 = 0.
        self.first = 1 if frontier == 0 else 0
        self.rprime: dict[int, int] = {1: 0} if frontier == 0 else {0: r0, 1: r1}
        self.calls = 0

    def _r_at(self, t: int) -> int | None:
        if t in self.rprime:
            return self.rprime[t]
        prev = self._word_at(t - 1)
        if prev is None:
            return None
        _, r, _ = unpack_line_answer(self.table.answer(prev), self.p)
        self.rprime[t] = r
        return r

    def _word_at(self, t: int) -> int | None:
        a = self.blocks[t]
        if a not in self.known:
            return None
        r = self._r_at(t)
        if r is None:
            return None
        return pack_line_query(self.frontier + t, self.known[a], r, self.p)

    def __call__(self, word: int) -> int:
        idx = self.calls
        self.calls += 1
        counter, x, r = unpack_line_query(word, self.p)
        t = counter - self.frontier
        matched = False
        if self.first <= t <= self.d:
            if idx in self.records:
                a = self.records[idx]
                if a != self.blocks[t]:
                    raise DecodeError(f"query {idx} records block {a}, depth {t} expects {self.blocks[t]}")
                self.known[a] = x
                self.rprime.setdefault(t, r)
                matched = True
            else:
                matched = word == self._word_at(t)
        base = self.table.answer(word)
        if matched and t < self.d:
            _, r_next, z = unpack_line_answer(base, self.p)
            self.rprime[t + 1] = r_next
            return pack_line_answer(self.blocks[t + 1], r_next, z, self.p)
        return base


def decode_enumerative(blob: EncodingBlob, ctx: MachineRound, n: int, d: int | None = None) -> DecodeResult:
    p = ctx.p
    d = p.d if d is None else d
    table_oracle = restore_table(blob.section("table").bits, n)
    memory = _read_memory(blob)
    fr = BitReader(blob.section("frontier").bits)
    frontier, a0, r0, r1 = fr.read(p.c_bits), fr.read(p.ell_bits), fr.read(p.u), fr.read(p.u)
    records = _parse_enum_records(blob, p, d)
    blob.section("records").header_bits = 1 + len(records) * (1 + _enum_count_width(d))
    recovered = {a for _, recs in records for _, a in recs}
    known: dict[int, int] = {}
    _fill_rest(blob, known, p, recovered)
    replays = []
    for seq, recs in records:
        answer = _DecodingOracle(table_oracle, p, frontier, [a0, *seq], r0, r1, known, dict(recs))
        replays.append(ctx.replay(memory, answer))
        missing = [a for _, a in recs if a not in known]
        if missing:
            raise DecodeError(f"sequence {seq} failed to reveal blocks {missing}")
    if len(known) != p.v:
        raise DecodeError(f"recovered {len(known)} of {p.v} blocks")
    return DecodeResult(table_oracle.table, InputVector(tuple(known[j] for j in range(p.v)), p.u), replays,
                        [seq for seq, _ in records])


# ----------------------------------------------------------------------------
# counting bound


@dataclass
class CountingReport:
    size: int
    max_len: int
    threshold: float
    passed: bool


def counting_bound_check(encode: Callable[[Hashable], Bits], messages: Iterable[Hashable],
                         limit: int = 1 << 20) -> CountingReport:
    """Check injectivity of ``encode`` on M and compare max length with log2|M| - 1.

    Codewords are compared as bit strings, so ``01`` and ``1`` are distinct.
    """
    seen: dict[tuple[int, int], Hashable] = {}
    max_len = 0
    size = 0
    for msg in messages:
        size += 1
        if size > limit:
            raise ValueError(f"message space exceeds {limit} elements")
        code = encode(msg)
        key = (code.value, code.length)
        if key in seen:
            raise InjectivityError(seen[key], msg, str(code)[:64])
        seen[key] = msg
        max_len = max(max_len, code.length)
    if size == 0:
        raise ValueError("empty message space")
    threshold = math.log2(size) - 1
    return CountingReport(size, max_len, threshold, max_len >= threshold)


def write_blob(path, blob: EncodingBlob) -> None:
    with open(path, "wb") as fh:
        fh.write(blob.to_bytes())


def read_blob(path) -> EncodingBlob:
    with open(path, "rb") as fh:
        return EncodingBlob.from_bytes(fh.read())
