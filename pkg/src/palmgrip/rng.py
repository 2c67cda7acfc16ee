"""Deterministic counter-based PRNG used for every stochastic decision.

The generator is SplitMix64: a 64-bit counter advanced by a fixed odd
constant, with the output finalized through two xor-multiply rounds.  All
state and output arithmetic is integer, so identical seeds give identical
streams on every platform and in any language that reimplements the three
lines below.  Floats only appear at the very end (`uniform`), derived from
the top 53 bits of the output word.
"""

from __future__ import annotations

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX1 & _MASK
    z = (z ^ (z >> 27)) * _MIX2 & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Seeded stream of 64-bit words and [0, 1) doubles."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self) -> float:
        # top 53 bits -> [0, 1), exactly representable
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()


def _fnv1a(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = (h ^ byte) * _FNV_PRIME & _MASK
    return h


def derive_seed(base: int, *components: int | str) -> int:
    """Derive an independent child seed from a base seed and labels.

    Mixing is associative-free (order matters) and purely integer, so the
    same (base, components) always name the same substream.
    """
    z = base & _MASK
    for part in components:
        word = _fnv1a(part) if isinstance(part, str) else part & _MASK
        z = _mix((z + _GAMMA) & _MASK) ^ word
    return _mix((z + _GAMMA) & _MASK)
