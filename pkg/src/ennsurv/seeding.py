"""One top-level seed, expanded into independent streams per purpose."""

import numpy as np

PURPOSES = {
    "init": 1,
    "batches": 2,
    "folds": 3,
    "simulate": 4,
    "split": 5,
    "oracle": 6,
}


def derive_rng(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    """Generator for ``purpose``; ``extra`` distinguishes e.g. fold indices."""
    key = [int(seed), PURPOSES[purpose], *map(int, extra)]
    return np.random.default_rng(np.random.SeedSequence(key))
