"""Deterministic random streams.

All randomness in the package flows from a single 64-bit seed through
counter-based Philox generators. Child streams are derived with spawn
keys, so parallel work (sweep cells, MCMC chains) is reproducible
regardless of scheduling.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Root generator for a run."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream identified by (seed, key); stable across runs."""
    return make_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def spawn_rngs(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """n independent child streams of an existing generator."""
    return rng.spawn(n)
