"""Per-purpose random streams derived from a master seed.

Each stream is a Philox (counter-based) generator keyed by a SeedSequence built
from ``(master_seed, purpose, *extra)``. Changing the scenario or the method
set never shifts the draws of an unrelated stream.
"""

import numpy as np

COVARIATES = 0
TREATMENT = 1
OUTCOME = 2
SUBSAMPLE = 3
MATCHING = 4
ORACLE = 5
FRESH_COHORT = 6


def stream(master_seed, purpose, *extra):
    """Return an independent ``numpy.random.Generator`` for one purpose."""
    if master_seed < 0:
        raise ValueError("seed must be non-negative")
    seq = np.random.SeedSequence([int(master_seed), int(purpose), *(int(e) for e in extra)])
    return np.random.Generator(np.random.Philox(seq))
