"""SplitMix64 streams.

Every random draw in a run comes from one of these, so a (scenario, seed) pair
reproduces bit for bit on any platform. Per-node streams are seeded with
``seed ^ (node * 0x9E3779B97F4A7C15)`` (mod 2**64).
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def node_seed(seed: int, node: int) -> int:
    return (seed ^ ((node * GOLDEN) & MASK64)) & MASK64


class Rng:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    @classmethod
    def for_node(cls, seed: int, node: int) -> "Rng":
        return cls(node_seed(seed, node))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.random() * n), n - 1)

    def expovariate(self, rate: float) -> float:
        return -math.log(1.0 - self.random()) / rate

    def u64_array(self, n: int) -> np.ndarray:
        """``n`` consecutive outputs, identical to ``n`` calls of next_u64."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN) & MASK64
        return z

    def random_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
