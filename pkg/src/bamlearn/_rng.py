"""Seeded random streams.

Every source of randomness draws from its own stream, derived from
``(seed, purpose, *keys)`` with :class:`numpy.random.SeedSequence` (a hash
based seed expander) feeding a PCG64 generator.  Streams never share state,
so reordering work between purposes never changes results.
"""

import numpy as np

PURPOSES = {
    "data": 0,
    "augment": 1,
    "init": 2,
    "optim": 3,
    "batch": 4,
    "eval": 5,
    "diag": 6,
}


def stream(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    if purpose not in PURPOSES:
        raise KeyError(f"unknown random stream purpose {purpose!r}")
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and stream keys must be non-negative")
    ss = np.random.SeedSequence([int(seed), PURPOSES[purpose], *map(int, keys)])
    return np.random.Generator(np.random.PCG64(ss))
