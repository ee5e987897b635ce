import numpy as np
from typing import Union


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Counter-based (Philox) generator keyed by the seed and any number of extra integer keys.
    The keys are hashed by SeedSequence, so streams for different keys are independent and
    adding new keys never perturbs existing streams.
    """
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError(f"seed keys must be non-negative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def cell_rng(seed: int, n: int, p: int, replicate: int) -> np.random.Generator:
    return make_rng(seed, n, p, replicate)


def as_rng(rng_or_seed: Union[np.random.Generator, int, None]) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return make_rng(0 if rng_or_seed is None else rng_or_seed)
