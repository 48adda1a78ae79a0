"""Reference machine strategies and the Monte-Carlo harnesses built on them.

All strategies share one self-delimiting memory/message format::

    blocks  : [0][count : cnt_bits] count * ([index : ceil(log2 v)][x : u])
    frontier: [1][0][i : counter_bits][ell : ell_bits][r : u]
    result  : [1][1][answer : n]

Memory is the concatenation of such messages, so parsing needs no framing.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .bits import BitReader, BitWriter, Bits, ceil_log2
from .chain import (
    Func,
    InputVector,
    NodeState,
    Parameters,
    pack_line_answer,
    pack_line_query,
    pack_simline_query,
    simline_input_index,
    unpack_line_answer,
    unpack_simline_answer,
)
from .mpc_engine import (
    MachineEnvelope,
    Message,
    OracleAccess,
    ShareOverflow,
    StepResult,
    Tape,
    block_owner,
)
from .oracle import Oracle, derive_seed
from .ram_eval import chain_trace, node_query


class InsufficientMemory(ValueError):
    pass


@dataclass
class Frontier:
    i: int
    ell: int
    r: int


@dataclass
class Parsed:
    blocks: dict[int, int]
    frontier: Frontier | None = None
    result: int | None = None


@dataclass(frozen=True)
class Layout:
    """Field widths of the shared message format for one configuration."""

    n: int
    u: int
    ell_bits: int
    cnt_bits: int
    counter_bits: int
    frontier_ell_bits: int

    def blocks(self, items: Sequence[tuple[int, int]]) -> Bits:
        w = BitWriter()
        w.write(0, 1)
        w.write(len(items), self.cnt_bits)
        for j, x in items:
            w.write(j, self.ell_bits)
            w.write(x, self.u)
        return w.getbits()

    def frontier(self, i: int, ell: int, r: int) -> Bits:
        w = BitWriter()
        w.write(0b10, 2)
        w.write(i, self.counter_bits)
        w.write(ell, self.frontier_ell_bits)
        w.write(r, self.u)
        return w.getbits()

    def result(self, answer: int) -> Bits:
        w = BitWriter()
        w.write(0b11, 2)
        w.write(answer, self.n)
        return w.getbits()

    def parse(self, memory: Bits) -> Parsed:
        rd = BitReader(memory)
        out = Parsed({})
        while rd.remaining:
            if rd.read(1) == 0:
                for _ in range(rd.read(self.cnt_bits)):
                    j = rd.read(self.ell_bits)
                    out.blocks[j] = rd.read(self.u)
            elif rd.read(1) == 0:
                out.frontier = Frontier(rd.read(self.counter_bits), rd.read(self.frontier_ell_bits),
                                        rd.read(self.u))
            else:
                out.result = rd.read(self.n)
        return out

    @property
    def frontier_bits(self) -> int:
        return 2 + self.counter_bits + self.frontier_ell_bits + self.u

    @property
    def result_bits(self) -> int:
        return 2 + self.n

    def blocks_bits(self, count: int) -> int:
        return 1 + self.cnt_bits + count * (self.ell_bits + self.u)

    def peak_memory(self, count: int) -> int:
        """Blocks kept plus whichever of frontier/result is larger."""
        return self.blocks_bits(count) + max(self.frontier_bits, self.result_bits)


def _layout(p: Parameters, max_blocks: int, func: Func) -> Layout:
    if func == "line":
        return Layout(p.n, p.u, p.ell_bits, ceil_log2(max_blocks + 1), p.c_bits, p.ell_bits)
    return Layout(p.n, p.u, p.ell_bits, ceil_log2(max_blocks + 1), (p.w + 1).bit_length(), 0)


# ----------------------------------------------------------------------------
# segment strategy (SimLine)


def segment_memory(p: Parameters, b: int) -> int:
    """Smallest s that lets each machine hold b blocks plus the frontier/result."""
    return _layout(p, b, "simline").peak_memory(b)


def segment_capacity(p: Parameters) -> int:
    """b = largest block count whose peak memory fits in s (at most v)."""
    b = min(p.v, p.s // max(p.record_bits, 1))
    while b > 0 and segment_memory(p, b) > p.s:
        b -= 1
    return b


def segment_rounds(p: Parameters, b: int) -> int:
    """Exact round count of SegmentStrategy (advance rounds + one claim round)."""
    i, rounds = 1, 0
    while i <= p.w:
        owner = simline_input_index(i, p) // b
        steps = 0
        while i <= p.w and steps < b and simline_input_index(i, p) // b == owner:
            i += 1
            steps += 1
        rounds += 1
    return rounds + 1


class SegmentStrategy:
    """Machine k stores blocks [k*b, (k+1)*b) and advances the chain through them."""

    name = "segment"
    func: Func = "simline"

    def __init__(self, p: Parameters, b: int | None = None):
        self.p = p
        self.b = segment_capacity(p) if b is None else b
        if self.b < 1:
            raise InsufficientMemory(f"s={p.s} cannot hold even one block plus the frontier")
        if self.b > p.v:
            self.b = p.v
        if p.m * self.b < p.v:
            raise InsufficientMemory(f"m*b = {p.m * self.b} < v = {p.v}")
        if p.q < self.b:
            raise ValueError(f"q={p.q} is smaller than the per-round advance b={self.b}")
        self.layout = _layout(p, self.b, "simline")
        if self.layout.peak_memory(self.b) > p.s:
            raise InsufficientMemory(f"b={self.b} needs s >= {self.layout.peak_memory(self.b)}")

    def owner(self, block: int) -> int:
        return block // self.b

    def closed_form_rounds(self) -> int:
        return -(-self.p.w // self.b) + 1

    def init_memories(self, X: InputVector, p: Parameters) -> list[Bits]:
        mems = []
        for k in range(p.m):
            items = [(j, X[j]) for j in range(k * self.b, min((k + 1) * self.b, p.v))]
            mem = self.layout.blocks(items)
            if k == self.owner(0):
                mem = mem + self.layout.frontier(1, 0, 0)
            mems.append(mem)
        return mems

    def step(self, env: MachineEnvelope, oracle: OracleAccess, tape: Tape) -> StepResult:
        p, lay, me = self.p, self.layout, env.machine_id
        state = lay.parse(env.memory)
        out = [Message(me, me, lay.blocks(sorted(state.blocks.items())))]
        if state.result is not None:
            return StepResult(out, claim=state.result)
        if state.frontier is None:
            return StepResult(out)
        i, r = state.frontier.i, state.frontier.r
        answer = None
        steps = 0
        while i <= p.w and steps < self.b:
            j = simline_input_index(i, p)
            if j not in state.blocks:
                break
            answer = oracle.query(pack_simline_query(state.blocks[j], r, p))
            r, _ = unpack_simline_answer(answer, p)
            i += 1
            steps += 1
        if i > p.w:
            out.append(Message(me, me, lay.result(answer)))
        else:
            out.append(Message(me, self.owner(simline_input_index(i, p)), lay.frontier(i, 0, r)))
        return StepResult(out)


# ----------------------------------------------------------------------------
# token strategy (Line)


class TokenStrategy:
    """The frontier token visits whichever machine owns the next needed block."""

    name = "token"
    func: Func = "line"

    def __init__(self, p: Parameters, policy: str = "round_robin_blocks",
                 owner: Sequence[int] | None = None):
        self.p = p
        self.owner = block_owner(p, policy, owner)
        per_machine = max(self.owner.count(k) for k in range(p.m))
        self.layout = _layout(p, per_machine, "line")
        need = self.layout.peak_memory(per_machine)
        if need > p.s:
            raise ShareOverflow(f"token strategy needs s >= {need}, have {p.s}")

    def init_memories(self, X: InputVector, p: Parameters) -> list[Bits]:
        mems = []
        for k in range(p.m):
            mem = self.layout.blocks([(j, X[j]) for j in range(p.v) if self.owner[j] == k])
            if k == self.owner[0]:
                mem = mem + self.layout.frontier(1, 0, 0)
            mems.append(mem)
        return mems

    def step(self, env: MachineEnvelope, oracle: OracleAccess, tape: Tape) -> StepResult:
        p, lay, me = self.p, self.layout, env.machine_id
        state = lay.parse(env.memory)
        out = [Message(me, me, lay.blocks(sorted(state.blocks.items())))]
        if state.result is not None:
            return StepResult(out, claim=state.result)
        if state.frontier is None:
            return StepResult(out)
        i, ell, r = state.frontier.i, state.frontier.ell, state.frontier.r
        answer = None
        while i <= p.w and ell in state.blocks and oracle.remaining > 0:
            answer = oracle.query(pack_line_query(i, state.blocks[ell], r, p))
            ell, r, _ = unpack_line_answer(answer, p)
            i += 1
        if i > p.w:
            out.append(Message(me, me, lay.result(answer)))
        else:
            if ell in state.blocks:
                dst = me
            else:
                dst = self.owner[ell]
                assert dst != me, "routing loop: owner does not hold its block"
            out.append(Message(me, dst, lay.frontier(i, ell, r)))
        return StepResult(out)


def adversarial_line_oracle(p: Parameters, oracle: Oracle, X: InputVector,
                            owner: Sequence[int]) -> Oracle:
    """Patch the chain so every next block belongs to a different machine."""
    if len(set(owner)) < 2:
        raise ValueError("need at least two owners to force a hand-off every step")
    patches: dict[int, int] = {}
    node = NodeState(1, 0, 0, 0)
    for _ in range(p.w):
        word = pack_line_query(node.index, X[node.ell], node.r, p)
        _, r, z = unpack_line_answer(oracle.answer(word), p)
        nxt = next(j for j in range(p.v) if owner[j] != owner[node.ell])
        patches[word] = pack_line_answer(nxt, r, z, p)
        node = NodeState(node.index + 1, nxt, r, z)
    return oracle.patch(patches)


# ----------------------------------------------------------------------------
# greedy probe (Line)


def greedy_probe(p: Parameters, oracle: Oracle, X: InputVector, owned: set[int],
                 frontier: NodeState, q: int | None = None) -> int:
    """Advance count k of one machine holding ``owned`` from ``frontier``."""
    q = p.q if q is None else q
    node, k = frontier, 0
    while k < q and node.index <= p.w and node.ell in owned:
        a = oracle.query(pack_line_query(node.index, X[node.ell], node.r, p), "probe")
        ell, r, z = unpack_line_answer(a, p)
        node = NodeState(node.index + 1, ell, r, z)
        k += 1
    return k


def greedy_probe_trials(p: Parameters, b: int, trials: int, master: bytes) -> list[int]:
    """k for each trial: fresh oracle, uniform X, uniform b-subset of blocks, start at node 1."""
    out = []
    for t in range(trials):
        sub = derive_seed(master, "greedy", t)
        rng = random.Random(sub)
        oracle = Oracle(p.n, sub)
        X = InputVector.random(p, rng)
        owned = set(rng.sample(range(p.v), b))
        out.append(greedy_probe(p, oracle, X, owned, NodeState(1, 0, 0, 0)))
    return out


@dataclass
class TailRow:
    j: int
    empirical: float
    expected: float
    sigma: float
    z: float


def tail_rows(ks: Sequence[int], rho: float, j_max: int) -> list[TailRow]:
    """Empirical P[k >= j] against rho**j with a binomial standard error."""
    n = len(ks)
    rows = []
    for j in range(j_max + 1):
        emp = sum(1 for k in ks if k >= j) / n
        exp = rho ** j
        sigma = math.sqrt(exp * (1 - exp) / n)
        z = 0.0 if sigma == 0 else (emp - exp) / sigma
        rows.append(TailRow(j, emp, exp, sigma, z))
    return rows


class GreedyProbeStrategy:
    """Machine 0 holds b tape-chosen blocks and advances greedily in round 0."""

    name = "greedy_probe"
    func: Func = "line"

    def __init__(self, p: Parameters, b: int, tape: Tape):
        self.p = p
        self.b = b
        self.layout = _layout(p, b, "line")
        if self.layout.peak_memory(b) > p.s:
            raise ShareOverflow(f"greedy probe needs s >= {self.layout.peak_memory(b)}")
        self.owned = sorted(_tape_sample(tape, p.v, b))

    def init_memories(self, X: InputVector, p: Parameters) -> list[Bits]:
        mems = [Bits.empty() for _ in range(p.m)]
        mems[0] = self.layout.blocks([(j, X[j]) for j in self.owned]) + self.layout.frontier(1, 0, 0)
        return mems

    def step(self, env: MachineEnvelope, oracle: OracleAccess, tape: Tape) -> StepResult:
        p, lay, me = self.p, self.layout, env.machine_id
        state = lay.parse(env.memory)
        if state.result is not None:
            return StepResult([], claim=state.result)
        if state.frontier is None or env.round > 0:
            return StepResult([])
        i, ell, r = state.frontier.i, state.frontier.ell, state.frontier.r
        answer = None
        while i <= p.w and ell in state.blocks and oracle.remaining > 0:
            answer = oracle.query(pack_line_query(i, state.blocks[ell], r, p))
            ell, r, _ = unpack_line_answer(answer, p)
            i += 1
        if i > p.w:
            return StepResult([Message(me, me, lay.result(answer))])
        return StepResult([])


def _tape_sample(tape: Tape, v: int, b: int) -> set[int]:
    """Uniform b-subset of range(v) from tape bits (Fisher-Yates on a tape-seeded RNG)."""
    rng = random.Random(tape.read(0, 256).value)
    return set(rng.sample(range(v), min(b, v)))


# ----------------------------------------------------------------------------
# jump adversary


def chain_entry(func: Func, pos: int, X: InputVector, ell: int, r: int, p: Parameters) -> int:
    if func == "line":
        return pack_line_query(pos, X[ell], r, p)
    return pack_simline_query(X[simline_input_index(pos, p)], r, p)


def jump_trial(p: Parameters, oracle: Oracle, X: InputVector, frontier: int, window: int,
               guesses: int, rng: random.Random, func: Func = "simline", reveal: bool = False) -> int:
    """Hits among ``guesses`` queries at positions frontier+1..frontier+window.

    The adversary is handed everything about each target entry except its r
    field (for Line this includes the block index), so a guess hits exactly
    when its u-bit r guess is right. ``reveal=True`` hands it r as well.
    """
    if frontier < 1 or frontier + window > p.w:
        raise ValueError("guess window must lie within positions 2..w")
    nodes = chain_trace(func, p, oracle, X)[: frontier + window]
    targets = {pos: node_query(func, nodes[pos - 1], X, p) for pos in range(frontier + 1, frontier + window + 1)}
    hits = 0
    for t in range(guesses):
        pos = frontier + 1 + t % window
        node = nodes[pos - 1]
        r = node.r if reveal else rng.getrandbits(p.u)
        word = chain_entry(func, pos, X, node.ell, r, p)
        oracle.query(word, "jump")
        hits += word == targets[pos]
    return hits


@dataclass
class JumpStats:
    trials: int
    guesses: int
    hits: int
    rate: float
    expected_rate: float
    sigma: float
    z: float


def jump_trials(p: Parameters, trials: int, guesses: int, window: int, master: bytes,
                func: Func = "simline", frontier: int = 1) -> JumpStats:
    hits = 0
    for t in range(trials):
        sub = derive_seed(master, "jump", t)
        rng = random.Random(sub)
        oracle = Oracle(p.n, sub)
        X = InputVector.random(p, rng)
        hits += jump_trial(p, oracle, X, frontier, window, guesses, rng, func)
    total = trials * guesses
    rate = 2.0 ** -p.u
    sigma = math.sqrt(rate * (1 - rate) / total)
    emp = hits / total
    return JumpStats(trials, guesses, hits, emp, rate, sigma, (emp - rate) / sigma)


class JumpStrategy:
    """Machine 0 spends its round-0 budget guessing entries ahead of node 1."""

    name = "jump"

    def __init__(self, p: Parameters, window: int, func: Func = "line"):
        self.p = p
        self.window = max(1, min(window, p.w - 1))
        self.func = func
        self.layout = _layout(p, p.v, func)

    def init_memories(self, X: InputVector, p: Parameters) -> list[Bits]:
        per = -(-p.v // p.m)
        own = [(j, X[j]) for j in range(min(per, p.v))]
        if self.layout.blocks_bits(len(own)) > p.s:
            raise ShareOverflow("jump strategy share exceeds s")
        return [self.layout.blocks(own)] + [Bits.empty() for _ in range(p.m - 1)]

    def step(self, env: MachineEnvelope, oracle: OracleAccess, tape: Tape) -> StepResult:
        p = self.p
        if env.machine_id != 0 or env.round > 0 or p.w < 2:
            return StepResult([])
        state = self.layout.parse(env.memory)
        width = p.u + p.ell_bits
        t = 0
        while oracle.remaining > 0:
            pos = 2 + t % self.window
            guess = tape.read(t * width, width).value
            r, ell = guess >> p.ell_bits, (guess & ((1 << p.ell_bits) - 1)) % p.v
            if self.func == "simline":
                ell = simline_input_index(pos, p)
            x = state.blocks.get(ell, 0)
            if self.func == "line":
                oracle.query(pack_line_query(pos, x, r, p))
            else:
                oracle.query(pack_simline_query(x, r, p))
            t += 1
        return StepResult([])


def make_strategy(name: str, p: Parameters, config: Mapping[str, str] | None = None,
                  tape: Tape | None = None):
    """Build a strategy from its CLI name and config keys."""
    config = config or {}
    if name == "segment":
        b = config.get("blocks_per_machine")
        return SegmentStrategy(p, int(b) if b is not None else None)
    if name == "token":
        return TokenStrategy(p, config.get("ownership_policy", "round_robin_blocks"))
    if name == "greedy_probe":
        if tape is None:
            raise ValueError("greedy_probe needs the run tape to pick its blocks")
        return GreedyProbeStrategy(p, int(config.get("blocks_per_machine", max(1, p.v // 2))), tape)
    if name == "jump":
        return JumpStrategy(p, int(config.get("guess_window", 4)), config.get("func", "line"))
    raise ValueError(f"unknown strategy {name!r}")
