"""Seeded random streams.

Every stream is a PCG64 generator seeded from a ``SeedSequence`` whose
entropy is the user seed and whose spawn key is the tuple of integer
coordinates, e.g. ``(repeat,)`` or ``(repeat, fold)``.  Streams with
different keys are statistically independent, so the order in which
repeats or folds are scheduled cannot change any draw.
"""

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit integer seed for a sub-task (for APIs that take an int)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
