"""Seed derivation helpers.

Every stochastic component takes an explicit integer seed and builds its own
``numpy.random.Generator``; nothing touches global RNG state.  Ensemble
runs expand a single root into per-model seeds with ``root ^ i`` and then
split each model seed into independent streams (parameter init, shuffling,
memory draws) with a SplitMix64 step per salt.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output step; a cheap, well-mixed 64-bit hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def model_seed(root: int, index: int) -> int:
    """Per-model seed: ``root ^ index`` (disjoint for index < 2**64)."""
    return (root ^ index) & _MASK64


def derive(seed: int, *salts: int) -> int:
    """Derive an independent stream seed from ``seed`` and integer salts."""
    out = seed & _MASK64
    for salt in salts:
        out = splitmix64(out ^ splitmix64(salt))
    return out


def rng_from(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _MASK64))
