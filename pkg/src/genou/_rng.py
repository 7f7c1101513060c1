"""Deterministic random-stream derivation.

Every Monte Carlo routine in the package accepts a seed-like argument and,
where it fans work out into chunks, derives one independent child stream per
chunk from a (seed, *keys) tuple.  The derivation is a stable hash, so results
do not depend on worker count or scheduling order.
"""

import hashlib

import numpy as np


def _key_words(key) -> list[int]:
    if isinstance(key, (int, np.integer)):
        return [int(key) & 0xFFFFFFFF, (int(key) >> 32) & 0xFFFFFFFF]
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def seed_sequence(seed, *keys) -> np.random.SeedSequence:
    """Build a SeedSequence from a root seed plus arbitrary int/str keys."""
    if isinstance(seed, np.random.SeedSequence):
        base = list(seed.entropy) if isinstance(seed.entropy, (list, tuple)) else [seed.entropy]
    elif isinstance(seed, np.random.Generator):
        # Derive from the generator's stream; deterministic given its state.
        base = [int(seed.integers(0, 2**63 - 1))]
    elif seed is None:
        base = [0]
    else:
        base = [int(seed)]
    words: list[int] = []
    for key in keys:
        words.extend(_key_words(key))
    return np.random.SeedSequence(base + words)


def derive_rng(seed, *keys) -> np.random.Generator:
    """Independent Generator for the substream named by ``keys``."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, SeedSequence or plain int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
