"""SplitMix64 streams with exact rational Bernoulli draws.

Python's ``random`` is avoided on purpose: the draw sequence must be the same
on every platform and every interpreter version, and probabilities are
compared as exact fractions against the raw 64-bit output.
"""

from __future__ import annotations

from fractions import Fraction

MASK64 = 0xFFFFFFFFFFFFFFFF

# Salts separating the decision stream from the shock stream, so that a
# paired control with different decisions still sees the same shocks.
DECISION_SALT = 0x5DEECE66D1CE4E5B
SHOCK_SALT = 0xA0761D6478BD642F


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    @classmethod
    def substream(cls, seed: int, salt: int) -> "SplitMix64":
        return cls(mix64((seed ^ salt) & MASK64))

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        return mix64(self.state)

    def bernoulli(self, p: Fraction) -> bool:
        """Consume exactly one draw; true with probability ``p``."""
        return self.next_u64() < threshold(p)


def threshold(p: Fraction) -> int:
    """Integer cut-off t with P(u64 < t) = floor(p * 2**64) / 2**64."""
    return (p.numerator << 64) // p.denominator
