"""Seed derivation shared by data generation, noise and sweeps.

Every random stream in the workbench is addressed by a tuple of integers
(base seed, grid index, trial index, row index, ...). The tuple is folded into
one 64-bit value with the SplitMix64 finalizer, so a stream never depends on
how many other streams were drawn before it.
"""

from __future__ import annotations

import numpy as np

MASK_64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB


def splitmix64(value: int) -> int:
    z = (value + _GOLDEN) & MASK_64
    z = ((z ^ (z >> 30)) * _MIX_1) & MASK_64
    z = ((z ^ (z >> 27)) * _MIX_2) & MASK_64
    return z ^ (z >> 31)


def mix_seed(seed: int, *parts: int) -> int:
    state = splitmix64(seed & MASK_64)
    for part in parts:
        state = splitmix64(state ^ (part & MASK_64))
    return state


def rng_for(seed: int, *parts: int) -> np.random.Generator:
    return np.random.default_rng(mix_seed(seed, *parts))


def uniform_stream(seed: int, indices: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in [0, 1): element i depends only on (seed, indices[i])."""
    base = np.uint64(mix_seed(seed))
    z = np.asarray(indices, dtype=np.uint64) ^ base
    # uint64 arithmetic wraps, which is exactly the mod-2**64 the finalizer needs.
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
