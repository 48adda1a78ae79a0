"""Shared reference implementations used as test oracles.

Everything here is written from the definitions, independently of the
package: words are built as binary strings and the oracle calls hashlib
directly.
"""

from __future__ import annotations

import hashlib
import math

import pytest


def ref_oracle_word(seed: bytes, x: int, n: int) -> int:
    # 32-byte digests cover n <= 256; wider oracles use the 64-byte variant.
    size = 32 if n <= 256 else 64
    digest = hashlib.blake2b(x.to_bytes(math.ceil(n / 8), "big"), key=seed, digest_size=size).digest()
    bits = "".join(f"{byte:08b}" for byte in digest)
    return int(bits[:n], 2)


def _field(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def ref_walk(func: str, n: int, u: int, v: int, w: int, blocks, answer):
    """Straight-line walk of the recurrences.

    Returns (output, trace) where trace[i-1] = (i, ell_i, r_i, z_i, query, answer)
    for i = 1..w. ``answer`` maps a query word to the oracle's n-bit answer.
    """
    lv = max(0, math.ceil(math.log2(v))) if v > 1 else 0
    ell, r = 0, 0
    trace = []
    out = None
    for i in range(1, w + 1):
        if func == "line":
            bits = _field(i, n - 2 * u) + _field(blocks[ell], u) + _field(r, u)
        else:
            bits = _field(blocks[(i - 1) % v], u) + _field(r, u) + "0" * (n - 2 * u)
        word = int(bits, 2)
        a = answer(word)
        abits = _field(a, n)
        trace.append((i, ell if func == "line" else (i - 1) % v, r, word, a))
        if func == "line":
            ell = int(abits[:lv], 2) % v if lv else 0
            r = int(abits[lv:lv + u], 2)
        else:
            r = int(abits[:u], 2)
        out = a
    return out, trace


@pytest.fixture
def seed1() -> bytes:
    return (1).to_bytes(32, "big")
