"""Deterministic, platform-independent random streams.

Each (seed, stream_id) pair names an independent PCG64 stream; the same pair
always yields the same draw sequence.  Stream ids below 10000 are reserved
for rollout environments (one per parallel env index); internal consumers
use the offsets below.
"""

from __future__ import annotations

import numpy as np

# stream-id namespace for non-environment consumers
STREAM_INIT = 10_001
STREAM_SAMPLER = 10_002
STREAM_EVAL = 10_003
STREAM_PROBE = 10_004


class RngStream:
    """A counted wrapper around a seeded PCG64 generator."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.draws = 0
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def random(self) -> float:
        """One double in [0, 1)."""
        self.draws += 1
        return float(self._gen.random())

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        self.draws += 1
        return self._gen.uniform(low, high, size=shape)

    def integers(self, high: int) -> int:
        """One integer in [0, high)."""
        self.draws += 1
        return int(self._gen.integers(high))

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        self.draws += 1
        return self._gen.choice(n, size=k, replace=False)
