"""Deterministic, splittable random number streams.

Every piece of randomness in the package flows through a counter-based
Philox generator keyed by a root seed plus an integer path, so any
stream can be reconstructed independently of execution order. Pipeline
code derives one stream per (epoch, batch, position, purpose), which
makes concurrent batch production bit-reproducible.
"""

import numpy as np

# Purpose codes appended as the last path component of pipeline streams.
REPLACE = 0
PARTNER = 1
BOXES = 2
NOISE_SELECT = 3
NOISE_MAP = 4
AUDIT = 5


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the (seed, *path) coordinate."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(key))
