"""Portable 64-bit linear congruential generator for reproducible inputs.

``state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64``;
a uniform draw in ``[0, 1)`` is the top 53 bits of the new state over ``2**53``.
"""
from __future__ import annotations

import numpy as np

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
MASK = (1 << 64) - 1


class Lcg64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK

    def next_u64(self) -> int:
        self.state = (MULTIPLIER * self.state + INCREMENT) & MASK
        return self.state

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) / float(1 << 53)
        return lo + (hi - lo) * u

    def uniform_array(self, shape, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
        """Row-major fill of an array with independent uniform draws."""
        n = int(np.prod(shape)) if shape else 1
        return np.array([self.uniform(lo, hi) for _ in range(n)]).reshape(shape)

    def spawn(self, count: int) -> list[int]:
        """Sub-seeds for independent sweep points, drawn in order."""
        return [self.next_u64() for _ in range(count)]
