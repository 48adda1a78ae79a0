"""Round-synchronous MPC simulator with an oracle, budgets, and bookkeeping.

Each round every machine runs ``strategy.step`` on its envelope (round-start
memory), with at most ``q`` adaptive oracle queries and read access to the
shared tape. Its outgoing messages are routed at the barrier; machine j's
memory for the next round is the concatenation of the payloads addressed to
it, ordered by (src, emission). Memory, query, and receiver-capacity limits
are enforced; any breach is recorded and ends the run unsuccessfully.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

from .bits import BitWriter, Bits
from .chain import Func, InputVector, Parameters
from .oracle import Oracle, derive_seed
from .ram_eval import chain_trace, node_query

DEFAULT_TAPE_CAP = 1 << 20
POLICIES = ("round_robin_blocks", "contiguous_blocks", "custom")


class ShareOverflow(ValueError):
    pass


class TapeCapExceeded(ValueError):
    pass


class QueryBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    payload: Bits


@dataclass(frozen=True)
class MachineEnvelope:
    machine_id: int
    round: int
    memory: Bits


@dataclass
class StepResult:
    messages: list[Message] = field(default_factory=list)
    claim: int | None = None


@dataclass(frozen=True)
class Violation:
    round: int
    machine: int | None
    kind: str  # "memory", "query", "receiver", "message", "claim"
    detail: str


class RoutingOverflow(Exception):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(v.detail for v in violations))
        self.violations = violations


class Tape:
    """Shared read-only random tape: a keyed-hash PRF in counter mode."""

    BLOCK_BITS = 512

    def __init__(self, seed: bytes, cap: int = DEFAULT_TAPE_CAP):
        self.seed = seed
        self.cap = cap

    def _block(self, index: int) -> int:
        digest = hashlib.blake2b(index.to_bytes(8, "big"), key=self.seed, digest_size=64).digest()
        return int.from_bytes(digest, "big")

    def read(self, offset: int, length: int) -> Bits:
        if offset < 0 or length < 0:
            raise ValueError("negative tape offset or length")
        if offset + length > self.cap:
            raise TapeCapExceeded(f"tape read [{offset}, {offset + length}) exceeds cap {self.cap}")
        if length == 0:
            return Bits.empty()
        first, last = offset // self.BLOCK_BITS, (offset + length - 1) // self.BLOCK_BITS
        span = Bits.empty()
        for b in range(first, last + 1):
            span = span + Bits(self._block(b), self.BLOCK_BITS)
        return span.slice(offset - first * self.BLOCK_BITS, length)


def shared_tape(seed: bytes, offset: int, length: int, cap: int = DEFAULT_TAPE_CAP) -> Bits:
    return Tape(seed, cap).read(offset, length)


class OracleAccess:
    """Budgeted oracle view handed to one machine for one round."""

    def __init__(self, answer: Callable[[int], int], q: int):
        self._answer = answer
        self.q = q
        self.queries: list[int] = []

    def query(self, word: int) -> int:
        if len(self.queries) >= self.q:
            raise QueryBudgetExceeded(f"query {len(self.queries) + 1} exceeds budget q={self.q}")
        self.queries.append(word)
        return self._answer(word)

    @property
    def remaining(self) -> int:
        return self.q - len(self.queries)


class Strategy(Protocol):
    name: str

    def init_memories(self, X: InputVector, p: Parameters) -> list[Bits]: ...

    def step(self, env: MachineEnvelope, oracle: OracleAccess, tape: Tape) -> StepResult: ...


@dataclass
class Distribution:
    owner: list[int]
    memories: list[Bits]

    def blocks_of(self, machine: int) -> list[int]:
        return [j for j, o in enumerate(self.owner) if o == machine]


def block_owner(p: Parameters, policy: str, owner: Sequence[int] | None = None) -> list[int]:
    if policy == "round_robin_blocks":
        return [j % p.m for j in range(p.v)]
    if policy == "contiguous_blocks":
        per = -(-p.v // p.m)
        return [j // per for j in range(p.v)]
    if policy == "custom":
        if owner is None or len(owner) != p.v or not all(0 <= o < p.m for o in owner):
            raise ValueError("custom policy needs an owner list of length v with ids in [0, m)")
        return list(owner)
    raise ValueError(f"unknown distribution policy {policy!r}")


def distribute_input(X: InputVector, p: Parameters, policy: str = "contiguous_blocks",
                     owner: Sequence[int] | None = None) -> Distribution:
    """Split X into per-machine block records ``[index : ceil(log2 v)][x : u]``."""
    own = block_owner(p, policy, owner)
    if policy != "custom" and -(-p.v // p.m) * p.record_bits > p.s:
        raise ShareOverflow(f"ceil(v/m)*(u+ceil(log2 v)) = {-(-p.v // p.m) * p.record_bits} > s={p.s}")
    writers = [BitWriter() for _ in range(p.m)]
    for j, o in enumerate(own):
        writers[o].write(j, p.ell_bits)
        writers[o].write(X[j], p.u)
    memories = [w.getbits() for w in writers]
    for i, mem in enumerate(memories):
        if mem.length > p.s:
            raise ShareOverflow(f"machine {i} share is {mem.length} bits > s={p.s}")
    return Distribution(own, memories)


def route_messages(outboxes: Iterable[Iterable[Message]], m: int, s: int) -> list[Bits]:
    """Deliver messages; inbox j is the (src, emission)-ordered concatenation.

    Raises RoutingOverflow listing every receiver whose inbox exceeds s bits.
    """
    inbound: list[list[tuple[int, int, Bits]]] = [[] for _ in range(m)]
    for box in outboxes:
        for k, msg in enumerate(box):
            inbound[msg.dst].append((msg.src, k, msg.payload))
    inboxes = []
    bad = []
    for j, items in enumerate(inbound):
        items.sort(key=lambda t: (t[0], t[1]))
        writer = BitWriter()
        for _, _, payload in items:
            writer.write_bits(payload)
        if writer.length > s:
            bad.append(Violation(-1, j, "receiver", f"machine {j} receives {writer.length} bits > s={s}"))
        inboxes.append(writer.getbits())
    if bad:
        raise RoutingOverflow(bad)
    return inboxes


def tape_for(oracle: Oracle, tape_seed: bytes | None, cap: int = DEFAULT_TAPE_CAP) -> Tape:
    """The run's tape; defaults to a seed derived from the oracle seed."""
    return Tape(tape_seed if tape_seed is not None else derive_seed(oracle.seed or bytes(32), "tape"), cap)


def replay_step(strategy: Strategy, env: MachineEnvelope, answer: Callable[[int], int], q: int,
                tape: Tape) -> tuple[list[int], StepResult | None, QueryBudgetExceeded | None]:
    """Run one machine-round in isolation against an arbitrary answer function."""
    access = OracleAccess(answer, q)
    try:
        result = strategy.step(env, access, tape)
    except QueryBudgetExceeded as exc:
        return access.queries, None, exc
    return access.queries, result, None


@dataclass
class RunReport:
    success: bool = False
    rounds_used: int = 0
    ground_truth: int = 0
    queries: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    cumulative: list[frozenset[int]] = field(default_factory=list)
    intersections: list[int] = field(default_factory=list)
    frontier: list[int] = field(default_factory=list)
    new_correct: dict[tuple[int, int], int] = field(default_factory=dict)
    messages_out_bits: dict[tuple[int, int], int] = field(default_factory=dict)
    claims: list[tuple[int, int, int]] = field(default_factory=list)
    memories: list[list[Bits]] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    m: int = 0

    @property
    def conformant(self) -> bool:
        return not self.violations

    def round_queries(self, k: int) -> set[int]:
        return {x for (r, _), qs in self.queries.items() if r == k for x in qs}

    def queries_before(self, k: int) -> list[tuple[int, int, int]]:
        """(round, machine, word) for every query issued before round k, in issue order."""
        out = []
        for (r, i), qs in sorted(self.queries.items()):
            if r < k:
                out.extend((r, i, x) for x in qs)
        return out

    def rows(self):
        """Rows for the run CSV."""
        claimed = {(r, i): val for r, i, val in self.claims}
        for k in range(len(self.memories)):
            for i in range(self.m):
                if (k, i) not in self.queries and (k, i) not in self.messages_out_bits:
                    continue
                yield {
                    "round": k,
                    "machine": i,
                    "queries_issued": len(self.queries.get((k, i), [])),
                    "new_correct_entries": self.new_correct.get((k, i), 0),
                    "messages_out_bits": self.messages_out_bits.get((k, i), 0),
                    "output_claimed": "" if (k, i) not in claimed else format(claimed[(k, i)], "x"),
                }


def run(p: Parameters, strategy: Strategy, X: InputVector, oracle: Oracle, rounds: int,
        ground_truth: int | None = None, func: Func = "line", tape_seed: bytes | None = None,
        stride: int | None = None, tape_cap: int = DEFAULT_TAPE_CAP) -> RunReport:
    """Execute up to ``rounds`` rounds; stop at the first round with a correct claim.

    Every oracle query goes through ``oracle.query`` tagged with the machine id
    and round, so ``oracle.query_log`` holds the union of all Q_i^(k).
    """
    p.validate(func)
    nodes = chain_trace(func, p, oracle, X)
    chain_words = [node_query(func, node, X, p) for node in nodes[:-1]]
    if ground_truth is None:
        ground_truth = oracle.answer(chain_words[-1])
    position: dict[int, int] = {}
    for idx, word in enumerate(chain_words, start=1):
        position.setdefault(word, idx)
    stride = p.d if stride is None else stride
    tape = tape_for(oracle, tape_seed, tape_cap)

    report = RunReport(ground_truth=ground_truth, m=p.m)
    memories = strategy.init_memories(X, p)
    if len(memories) != p.m:
        raise ValueError(f"strategy produced {len(memories)} memories for m={p.m}")
    seen: set[int] = set()
    frontier = 0

    for k in range(rounds):
        report.memories.append(list(memories))
        for i, mem in enumerate(memories):
            if mem.length > p.s:
                report.violations.append(Violation(k, i, "memory", f"machine {i} holds {mem.length} bits > s={p.s}"))
        if report.violations:
            break

        outboxes: list[list[Message]] = []
        for i in range(p.m):
            env = MachineEnvelope(i, k, memories[i])

            def answer(word, _i=i, _k=k):
                return oracle.query(word, _i, _k)

            issued, result, overrun = replay_step(strategy, env, answer, p.q, tape)
            report.queries[(k, i)] = issued
            fresh = 0
            for word in issued:
                if word in position and word not in seen:
                    fresh += 1
                    frontier = max(frontier, position[word])
                seen.add(word)
            report.new_correct[(k, i)] = fresh
            if overrun is not None:
                report.violations.append(Violation(k, i, "query", str(overrun)))
                break
            out = []
            for msg in result.messages:
                if msg.src != i or not 0 <= msg.dst < p.m:
                    report.violations.append(
                        Violation(k, i, "message", f"bad message {msg.src}->{msg.dst} from machine {i}"))
                out.append(msg)
            outboxes.append(out)
            report.messages_out_bits[(k, i)] = sum(msg.payload.length for msg in out)
            if result.claim is not None:
                if not 0 <= result.claim < 1 << p.n:
                    report.violations.append(Violation(k, i, "claim", f"claim does not fit in {p.n} bits"))
                else:
                    report.claims.append((k, i, result.claim))
            if report.violations:
                break

        report.cumulative.append(frozenset(seen))
        report.frontier.append(frontier)
        report.intersections.append(sum(1 for w in seen if position.get(w, 0) > (k + 1) * stride))
        if report.violations:
            report.rounds_used = k + 1
            break
        try:
            memories = route_messages(outboxes, p.m, p.s)
        except RoutingOverflow as exc:
            report.violations.extend(Violation(k, v.machine, v.kind, v.detail) for v in exc.violations)
            report.rounds_used = k + 1
            break
        report.rounds_used = k + 1
        if any(val == ground_truth for r, _, val in report.claims if r == k):
            report.success = True
            break

    if report.violations:
        report.success = False
    return report


def machine_memory_at(p: Parameters, strategy: Strategy, X: InputVector, oracle: Oracle, machine: int,
                      round: int, func: Func = "line", tape_seed: bytes | None = None) -> tuple[Bits, RunReport]:
    """Memory handed to ``machine`` at the start of ``round`` (the A1 output)."""
    report = run(p, strategy, X, oracle, round + 1, func=func, tape_seed=tape_seed)
    if report.violations:
        raise RuntimeError(f"run violated the model: {report.violations}")
    if len(report.memories) <= round:
        raise RuntimeError(f"run ended after {len(report.memories)} rounds, before round {round}")
    return report.memories[round][machine], report
