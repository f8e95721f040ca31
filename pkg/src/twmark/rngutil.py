"""Deterministic RNG streams keyed by structured tuples.

Every randomized component derives its generator from a key like
(master_seed, "local_train", client, round) so results are identical
for any worker count and re-run.
"""

import hashlib

import numpy as np


def _as_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & ((1 << 64) - 1)
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode()).digest()[:8], "little")
    raise TypeError(f"rng key parts must be int or str, got {type(part)}")


def seed_sequence(*parts) -> np.random.SeedSequence:
    return np.random.SeedSequence([_as_int(p) for p in parts])


def rng_from_key(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(*parts)))
