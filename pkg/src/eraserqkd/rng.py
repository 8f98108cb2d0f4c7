"""Seeded random sources.

Every random draw in a session comes from a PCG64 generator whose state is
derived by numpy's ``SeedSequence`` from the 64-bit session seed plus a spawn
key. Rounds use ``substream(seed, ROUNDS, round_id)``, so the outcome of a
round never depends on how many rounds ran before it or in which order.
"""
from __future__ import annotations

import numpy as np

SEED_MAX = 2**64 - 1

# Spawn-key prefixes for the independent streams of one session.
ROUNDS = 0
DISCLOSURE = 1
REPETITION = 2


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def substream(seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *key: int) -> int:
    """A child 64-bit seed, used for repeated sessions."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
