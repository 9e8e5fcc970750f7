"""Deterministic rng derivation.

Every stochastic step in a pipeline draws from a stream derived from the
root seed and a label path, so results are reproducible and independent of
worker count or execution order.
"""

from __future__ import annotations

import hashlib
import random
import secrets

import numpy as np

_SEED_BYTES = 16


def derive_seed(root: int, *labels: object) -> int:
    """Counter-based split: hash (root, labels...) into a fresh 128-bit seed."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:_SEED_BYTES], "little")


def spawn_random(root: int | None, *labels: object) -> random.Random:
    """Integer-stream rng for the exact samplers (randrange/getrandbits)."""
    if root is None:
        return secrets.SystemRandom()
    return random.Random(derive_seed(root, *labels))


def spawn_generator(root: int | None, *labels: object) -> np.random.Generator:
    """Vectorized rng for sampling and shuffling."""
    if root is None:
        return np.random.default_rng()
    return np.random.default_rng(derive_seed(root, *labels))
