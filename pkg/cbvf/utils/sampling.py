"""Seeded 64-bit linear congruential generator.

state ← (6364136223846793005 · state + 1442695040888963407) mod 2^64,
uniform = (state >> 11) / 2^53.
"""

from typing import Sequence

import numpy as np

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
MASK = (1 << 64) - 1


class Lcg64:
    """Deterministic uniform sampler."""

    def __init__(self, seed: int = 0) -> None:
        self.state = int(seed) & MASK

    def next_u64(self) -> int:
        self.state = (MULTIPLIER * self.state + INCREMENT) & MASK
        return self.state

    def uniform(self) -> float:
        """A float in [0, 1)."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def uniforms(self, count: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(count)])

    def sample_box(self, lo: Sequence[float], hi: Sequence[float], count: int) -> np.ndarray:
        """``count`` points uniform in the box, drawn point by point and axis by axis."""
        lo_arr = np.asarray(lo, dtype=float)
        hi_arr = np.asarray(hi, dtype=float)
        raw = self.uniforms(count * len(lo_arr)).reshape(count, len(lo_arr))
        return lo_arr + raw * (hi_arr - lo_arr)
