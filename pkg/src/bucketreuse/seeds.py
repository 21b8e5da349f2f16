"""Deterministic seed derivation for simulation work units.

Every random stream in a run descends from one master seed through
`np.random.SeedSequence([master_seed, stream_tag, *indices])`. The stream
tags below keep unrelated streams (starting points, bucket effects, the
per-replication day loop, ...) from ever colliding, and make results
independent of execution order or worker count.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "STREAM_STARTING_POINT",
    "STREAM_BUCKET_EFFECTS",
    "STREAM_REPLICATION",
    "STREAM_POPULATION",
    "STREAM_SCHEDULE",
    "derive_rng",
]

STREAM_STARTING_POINT = 1
STREAM_BUCKET_EFFECTS = 2
STREAM_REPLICATION = 3
STREAM_POPULATION = 4
STREAM_SCHEDULE = 5


def derive_rng(master_seed: int, stream_tag: int, *indices: int) -> np.random.Generator:
    """Child generator for (master seed, stream, index...), independent of
    when or on which worker it is created."""
    seq = np.random.SeedSequence([int(master_seed), int(stream_tag), *map(int, indices)])
    return np.random.Generator(np.random.PCG64(seq))
