"""Counter-based random streams for reproducible Monte Carlo.

Every trial draws from its own Philox stream keyed by (seed, trial index),
so estimates do not depend on evaluation order or parallelism.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, tag: str) -> int:
    """Derive an independent 64-bit seed for a named subexperiment."""
    digest = hashlib.blake2b(
        f"{master_seed & _MASK64}:{tag}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator for one Monte Carlo trial, independent of all other trials."""
    if trial < 0:
        raise ValueError(f"trial index must be >= 0, got {trial}")
    key = np.array([seed & _MASK64, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
