"""Fixed 64-bit hash and mix primitives.

Everything seeded in this package flows through these functions so results
are identical across runs, platforms, and Python versions. Python's own
hash() is salted per process and is never used.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_GAMMA = 0x9E3779B97F4A7C15


def fnv1a64(data: bytes) -> int:
    """FNV-1a over bytes, 64-bit."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & MASK64
    return h


def mix64(x: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix of a 64-bit value."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def hash_token(token: str) -> int:
    """Stable 64-bit hash of a text token (FNV-1a then mixed)."""
    return mix64(fnv1a64(token.encode("utf-8")))


class SplitMix64:
    """Tiny deterministic 64-bit generator for seeded synthetic data.

    Not for cryptography or general-purpose simulation; it exists so that
    synthetic designs are bit-identical everywhere.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return mix64(self._state)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n
