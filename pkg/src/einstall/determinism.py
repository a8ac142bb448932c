"""Cross-language-reproducible hashing, RNG and shuffling.

Everything that randomizes or fingerprints state in this package flows
through the three primitives below, so a port to another language can
reproduce traces bit-for-bit:

* ``fnv1a64``     -- FNV-1a, 64-bit (offset 0xcbf29ce484222325, prime
                     0x100000001b3).
* ``SplitMix64``  -- Vigna's splitmix64 (gamma 0x9E3779B97F4A7C15).
  Gaussians use the Box-Muller cosine branch; each draw consumes exactly
  two 64-bit outputs, mapped to doubles by ``(u >> 11) * 2**-53``.
* ``fisher_yates``-- backward Fisher-Yates with ``next_u64() % (i + 1)``
  index selection (modulo bias is irrelevant here; reproducibility is not).
"""

from __future__ import annotations

import math
from typing import Sequence, TypeVar

_MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

T = TypeVar("T")


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    """64-bit FNV-1a over ``data``; pass ``h`` to chain across chunks."""
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def mix_key(*parts: str | int) -> int:
    """Hash heterogeneous key parts into one 64-bit seed.

    Parts are UTF-8 encoded (ints in decimal) and joined with a 0x1f unit
    separator so ("ab","c") and ("a","bc") hash differently.
    """
    h = FNV_OFFSET
    for i, part in enumerate(parts):
        if i > 0:
            h = fnv1a64(b"\x1f", h)
        h = fnv1a64(str(part).encode("utf-8"), h)
    return h


class SplitMix64:
    """Deterministic 64-bit generator; state advances by the golden gamma."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_double(self) -> float:
        """Uniform double in [0, 1), 53 significant bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_gaussian(self) -> float:
        """Standard normal draw; always consumes exactly two u64 outputs.

        Box-Muller cosine branch with u1 shifted into (0, 1] so the log is
        defined; the paired sine value is discarded to keep the draw count
        independent of call history.
        """
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = self.next_double()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def next_below(self, bound: int) -> int:
        """Integer in [0, bound) via plain modulo (documented, reproducible)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound


def fisher_yates(items: Sequence[T], rng: SplitMix64) -> list[T]:
    """Seeded permutation of ``items``; input is not mutated."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next_below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
