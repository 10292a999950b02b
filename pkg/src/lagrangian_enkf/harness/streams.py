"""Counter-based random streams keyed by (seed, purpose, member, step).

Streams do not depend on the filter kind, so paired runs of different
filters see the same observations and perturbations.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {"ensemble": 1, "observation": 2, "perturbation": 3}


class RngStreams:
    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)

    def get(self, purpose: str, member: int = 0, step: int = 0) -> np.random.Generator:
        tag = PURPOSES[purpose]
        ss = np.random.SeedSequence(self.seed, spawn_key=(tag, int(member), int(step)))
        return np.random.Generator(np.random.Philox(ss))

    def members(self, purpose: str, n: int, step: int = 0) -> list[np.random.Generator]:
        return [self.get(purpose, i, step) for i in range(n)]
