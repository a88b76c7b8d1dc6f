"""Seedable counter-based random streams.

Every stochastic step draws from a Philox generator keyed by a tuple of
integers, e.g. ``(run_seed, epoch, view_index)``. The same key always
replays the same stream, and distinct keys give statistically independent
streams, so a run can be reproduced epoch by epoch without threading one
generator through the whole program.
"""

import numpy as np

# stream tags, appended to (seed, epoch) keys
VIEW_1 = 1
VIEW_2 = 2
NEGATIVES = 3
MEMBERSHIP_BATCH = 4
INIT = 5


def child_rng(*key):
    """Return a Philox-backed ``Generator`` for the integer key tuple."""
    if any(int(k) < 0 for k in key):
        raise ValueError(f"rng key entries must be non-negative, got {key}")
    seq = np.random.SeedSequence([int(k) for k in key])
    return np.random.Generator(np.random.Philox(seq))


def as_rng(rng):
    """Accept a ``Generator``, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return child_rng(int(rng))
