"""Seeded random number streams.

All randomness in the toolkit flows through PCG64 generators built here.
A child stream is derived from ``(seed, stream_id, index)`` through
``numpy.random.SeedSequence([seed, stream_id, index])``, so results are
reproducible bit-for-bit given the same seed and numpy's PCG64.  The
generator algorithm (PCG64 as shipped by numpy) is part of the on-disk
format contract: regenerating a dataset from its sidecar requires it.
"""

from __future__ import annotations

import numpy as np

# Stream ids, one per independent consumer of randomness.
STREAM_DATA = 1          # dataset generation
STREAM_INIT = 2          # network parameter initialization
STREAM_SAMPLE = 3        # sampling from trained models
STREAM_TRAIN_NOISE = 4   # per-iteration training noise (flow matching)
STREAM_SIM = 5           # SDE / PDE simulation noise


def make_rng(seed: int, stream_id: int = 0, index: int = 0) -> np.random.Generator:
    """Return a PCG64 generator for the given (seed, stream, index) triple."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream_id, index])))
