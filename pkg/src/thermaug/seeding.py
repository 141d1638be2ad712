"""Seed derivation.

A sub-seed is a pure function of a base seed and a tuple of keys. Keys are
hashed (SHA-256 of their ``repr``, first 4 bytes) into 32-bit words and fed
as the spawn key of :class:`numpy.random.SeedSequence`; two 32-bit words of
its output form the 64-bit sub-seed. Streams for distinct key tuples are
independent, and the result never depends on call order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _word(key) -> int:
    if isinstance(key, (int, np.integer)) and 0 <= int(key) < 2**32:
        return int(key)
    digest = hashlib.sha256(repr(key).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def derive_seed(base: int, *keys) -> int:
    ss = np.random.SeedSequence(int(base) % 2**128, spawn_key=tuple(_word(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def rng_for(base: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *keys))
