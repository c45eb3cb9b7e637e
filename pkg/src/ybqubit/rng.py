"""Seeded random streams.

Every stochastic draw in the package comes from a stream keyed by
``(master seed, purpose, index)``. Streams for different indices never
overlap, so results do not depend on the order in which shots or
trajectories are processed.
"""

import numpy as np

# Purpose tags keep independent draws for the same index apart.
TRAJECTORY = 0
DETECTION = 1
SHOT_NOISE = 2
PREPARATION = 3
SCAN_NOISE = 4
REPLICA = 5


def stream(seed, index, purpose=TRAJECTORY):
    """Return a PCG64 generator for ``(seed, purpose, index)``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.PCG64(ss))
