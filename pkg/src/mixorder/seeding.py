"""Deterministic seed derivation.

Every random stream in the package is obtained from a single base seed by
``split(base_seed, *indices)``, a SplitMix64-style mixing chain. Streams for
different index tuples are statistically independent for practical purposes
and do not depend on execution order.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def split(seed: int, *indices: int) -> int:
    """Derive a 64-bit child seed from ``seed`` and a path of indices."""
    state = _mix64(int(seed) & _MASK)
    for i in indices:
        state = _mix64(state ^ _mix64(int(i) & _MASK))
    return state


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))
