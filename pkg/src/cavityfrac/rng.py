"""Deterministic random number generation.

All stochastic code in the package draws from a Philox counter-based
generator keyed by an explicit integer seed, so any dataset or training
run is reproducible byte-for-byte from its seed alone.
"""

import numpy as np


def rng_from_seed(seed: int) -> np.random.Generator:
    """Return the package-wide portable generator for an integer seed."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


def sample_seed(base_seed: int, index: int) -> int:
    """Per-sample seed derivation: base seed plus sample index."""
    return int(base_seed) + int(index)
