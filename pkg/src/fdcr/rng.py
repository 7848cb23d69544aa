"""Seeded PCG64 streams keyed by (seed, index...)."""
import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible generator for ``seed`` and a stream key.

    Different keys give statistically independent streams, so replications
    and sub-tasks never share random numbers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
