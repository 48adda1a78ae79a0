"""Sequential evaluation of Line and SimLine with exactly w oracle queries.

Working state is the current node (index, ell, r) plus the last answer, so
memory beyond X is O(n) bits; the optional trace is the only thing that grows.
"""

from __future__ import annotations

from typing import Hashable

from .chain import (
    Func,
    InputVector,
    NodeState,
    Parameters,
    pack_line_query,
    pack_simline_query,
    simline_input_index,
    unpack_line_answer,
    unpack_simline_answer,
)
from .oracle import Oracle

RAM_TAG = "ram"


def _check(p: Parameters, X: InputVector, func: Func) -> None:
    p.validate(func)
    if X.v != p.v or X.u != p.u:
        raise ValueError(f"input has v={X.v}, u={X.u}; parameters say v={p.v}, u={p.u}")


def line_step(node: NodeState, X: InputVector, p: Parameters, oracle: Oracle,
              tag: Hashable = RAM_TAG, round: int | None = None) -> tuple[int, int, NodeState]:
    """Query node ``node``; return (query word, answer, next node)."""
    word = pack_line_query(node.index, X[node.ell], node.r, p)
    a = oracle.query(word, tag, round)
    ell, r, z = unpack_line_answer(a, p)
    return word, a, NodeState(node.index + 1, ell, r, z)


def simline_step(node: NodeState, X: InputVector, p: Parameters, oracle: Oracle,
                 tag: Hashable = RAM_TAG, round: int | None = None) -> tuple[int, int, NodeState]:
    word = pack_simline_query(X[simline_input_index(node.index, p)], node.r, p)
    a = oracle.query(word, tag, round)
    r, z = unpack_simline_answer(a, p)
    nxt = node.index + 1
    return word, a, NodeState(nxt, simline_input_index(nxt, p), r, z)


def _evaluate(func: Func, p: Parameters, oracle: Oracle, X: InputVector, trace: bool,
              tag: Hashable):
    _check(p, X, func)
    step = line_step if func == "line" else simline_step
    node = NodeState(1, 0, 0, 0)
    nodes = [node] if trace else None
    answer = 0
    for _ in range(p.w):
        _, answer, node = step(node, X, p, oracle, tag)
        if trace:
            nodes.append(node)
    return answer, nodes


def eval_line(p: Parameters, oracle: Oracle, X: InputVector, trace: bool = False,
              tag: Hashable = RAM_TAG) -> tuple[int, list[NodeState] | None]:
    """Line output (the full n-bit w-th answer) and, optionally, nodes 1..w+1."""
    return _evaluate("line", p, oracle, X, trace, tag)


def eval_simline(p: Parameters, oracle: Oracle, X: InputVector, trace: bool = False,
                 tag: Hashable = RAM_TAG) -> tuple[int, list[NodeState] | None]:
    return _evaluate("simline", p, oracle, X, trace, tag)


def evaluate(func: Func, p: Parameters, oracle: Oracle, X: InputVector, trace: bool = False,
             tag: Hashable = RAM_TAG):
    return _evaluate(func, p, oracle, X, trace, tag)


def node_query(func: Func, node: NodeState, X: InputVector, p: Parameters) -> int:
    if func == "line":
        return pack_line_query(node.index, X[node.ell], node.r, p)
    return pack_simline_query(X[simline_input_index(node.index, p)], node.r, p)


def chain_trace(func: Func, p: Parameters, oracle: Oracle, X: InputVector) -> list[NodeState]:
    """Nodes 1..w+1 computed with un-logged lookups."""
    _check(p, X, func)
    nodes = [NodeState(1, 0, 0, 0)]
    for i in range(1, p.w + 1):
        a = oracle.answer(node_query(func, nodes[-1], X, p))
        if func == "line":
            ell, r, z = unpack_line_answer(a, p)
        else:
            r, z = unpack_simline_answer(a, p)
            ell = simline_input_index(i + 1, p)
        nodes.append(NodeState(i + 1, ell, r, z))
    return nodes


def correct_chain(p: Parameters, oracle: Oracle, X: InputVector, func: Func = "line") -> list[int]:
    """Packed query words of nodes 1..w, in chain order."""
    nodes = chain_trace(func, p, oracle, X)
    return [node_query(func, node, X, p) for node in nodes[:-1]]


def trace_rows(func: Func, p: Parameters, oracle: Oracle, X: InputVector):
    """Rows for the trace CSV: i, ell, r_hex, z_hex, query_hex, answer_hex."""
    nodes = chain_trace(func, p, oracle, X)
    hexw = (p.n + 3) // 4
    for node in nodes:
        if node.index <= p.w:
            word = node_query(func, node, X, p)
            query_hex = format(word, f"0{hexw}x")
            answer_hex = format(oracle.answer(word), f"0{hexw}x")
        else:
            query_hex = answer_hex = ""
        yield {
            "i": node.index,
            "ell": node.ell,
            "r_hex": format(node.r, "x"),
            "z_hex": format(node.z, "x"),
            "query_hex": query_hex,
            "answer_hex": answer_hex,
        }
