"""Seeded random streams keyed by (master seed, purpose, level, index).

Every random quantity attached to a node comes from its own stream, so the
draws do not depend on generation order or on how work is split between
processes.
"""
from __future__ import annotations

import numpy as np

TAGS = {
    "root": 0,
    "noise": 1,
    "edge": 2,
    "shared-edge": 3,
    "rewire": 4,
    "instance": 5,
    "trial": 6,
    "tv": 7,
    "bootstrap": 8,
    "subsample": 9,
}


def stream(seed: int, tag: str, *key: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(TAGS[tag], *map(int, key))))
    )


def node_rng(seed: int, level: int, index: int, tag: str) -> np.random.Generator:
    return stream(seed, tag, level, index)


def derive_seed(seed: int, tag: str, *key: int) -> int:
    """A 64-bit child seed, stable across runs and platforms."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(TAGS[tag], *map(int, key)))
    return int(ss.generate_state(1, np.uint64)[0])
