"""Seed derivation and per-stream generators.

Every random draw in the package comes from a Philox (counter-based) stream
keyed by a 64-bit seed. Independent sub-streams (replicates, particles,
projections) get their keys from :func:`child`, a SplitMix64 mix of the parent
seed and the stream index, so a stream depends only on ``(parent, index)`` and
never on the order in which streams are created or consumed.
"""

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (Steele, Lea & Flood 2014)."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def child(seed: int, index: int) -> int:
    """Seed of sub-stream ``index`` of ``seed``.

    ``child(s, i) = splitmix64(splitmix64(s) ^ splitmix64(i))``; distinct
    indices give unrelated keys, and the result is itself a valid seed.
    """
    seed = check_seed(seed)
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return splitmix64(splitmix64(seed) ^ splitmix64(index & MASK64))


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=check_seed(seed)))
