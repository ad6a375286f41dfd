"""Deterministic RNG streams derived from one master seed.

Every source of randomness in the toolkit (parameter init, dropout masks,
epoch shuffling, fold assignment) draws from `rng_for(seed, *tags)` so that a
single seed makes the whole pipeline reproducible, and distinct purposes get
independent streams.
"""

import hashlib

import numpy as np


def _tag_int(tag: str | int) -> int:
    if isinstance(tag, int):
        return tag & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, *tags: str | int) -> np.random.Generator:
    """A Generator keyed by (seed, tags). Same arguments, same stream."""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [_tag_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *tags: str | int) -> int:
    """A child seed keyed by (seed, tags), for handing to independent workers
    (e.g. one per cross-validation fold)."""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [_tag_int(t) for t in tags]
    state = np.random.SeedSequence(entropy).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
