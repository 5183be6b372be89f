"""Seed handling shared by every sampler.

All randomness flows through :class:`numpy.random.SeedSequence`, so a run is a
pure function of its integer seed and child streams can be spawned for
independent replications without overlap.
"""

from __future__ import annotations

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (bool, np.bool_)) or seed is None:
        raise TypeError("an explicit integer seed is required")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise TypeError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed))


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def child_sequences(seed, n: int) -> list[np.random.SeedSequence]:
    # built explicitly instead of SeedSequence.spawn, which mutates the parent
    parent = as_seed_sequence(seed)
    return [
        np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + (i,))
        for i in range(n)
    ]


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(c)) for c in child_sequences(seed, n)]


def seed_record(seed):
    """Integer (or entropy) to store alongside an output for provenance."""
    if isinstance(seed, np.random.SeedSequence):
        if seed.spawn_key:
            return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
        return seed.entropy
    return int(seed)
