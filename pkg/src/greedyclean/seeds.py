"""Deterministic seed derivation and a tiny splittable gap generator.

Every trial derives independent 64-bit seeds for its clock and its dust
environment by mixing a root seed with structured tokens (purpose tag, N,
the bits of alpha, trial index).  Dust gaps additionally come from one
splitmix64 stream per halfline, keyed by (env seed, line id), so a line's
revealed environment is a pure function of those two integers.  That is
what makes coupled comparisons (same dust, different worker count or
alpha) possible and keeps replays byte-identical regardless of how trials
are scheduled.
"""

from __future__ import annotations

import struct
from math import log

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# (0, 1] scale for 53-bit mantissas
_INV53 = 1.0 / (1 << 53)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return (new_state, 64-bit output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _token_bits(token: int | float | str) -> int:
    if isinstance(token, bool):  # bool is an int; reject to avoid surprises
        raise TypeError("bool tokens are ambiguous")
    if isinstance(token, int):
        return token & _MASK64
    if isinstance(token, float):
        return struct.unpack("<Q", struct.pack("<d", token))[0]
    if isinstance(token, str):
        return _fnv1a(token.encode("utf-8"))
    raise TypeError(f"unsupported seed token type: {type(token)!r}")


def derive_seed(root: int, *tokens: int | float | str) -> int:
    """Mix a root seed with tokens into a fresh 64-bit seed.

    Stable across processes and platforms (no reliance on hash()).
    """
    state = (root & _MASK64) ^ _GOLDEN
    for token in tokens:
        state, out = splitmix64(state ^ _token_bits(token))
        state ^= out
    _, out = splitmix64(state)
    return out


class ExpStream:
    """Exponential(1) variates from a private splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> float:
        s = (self.state + _GOLDEN) & _MASK64
        self.state = s
        z = ((s ^ (s >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        z ^= z >> 31
        # (z >> 11) + 1 lies in (0, 2^53], so the uniform is in (0, 1]
        return -log(((z >> 11) + 1) * _INV53)


class ListStream:
    """Scripted gap source for tests; raises when exhausted."""

    __slots__ = ("values", "index")

    def __init__(self, values):
        self.values = list(values)
        self.index = 0

    def next(self) -> float:
        if self.index >= len(self.values):
            raise RuntimeError("scripted gap stream exhausted")
        value = self.values[self.index]
        self.index += 1
        return value
