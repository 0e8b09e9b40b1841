"""Keyed random streams: one independent Generator per (master seed, key...)."""
from __future__ import annotations

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for ``key`` under ``master_seed``; independent of evaluation order."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def master_from(rng: np.random.Generator | int | None) -> int:
    """Turn a Generator (or seed) into a 63-bit master seed for keyed derivation."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    if rng is None:
        return int(np.random.SeedSequence().entropy % (2**63 - 1))
    return int(rng)
