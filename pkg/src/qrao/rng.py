"""Project-wide random number generation.

Every random draw goes through PCG64 so that instance suites and sampled
measurements are reproducible from integer seeds alone.
"""

from __future__ import annotations

import numpy as np

PRNG_NAME = "PCG64"


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def child_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent, deterministic sub-streams of ``seed``."""
    return np.random.SeedSequence(seed).spawn(count)
