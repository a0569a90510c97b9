"""Seed derivation.

Every random quantity in a run is drawn from its own stream, keyed by the
root seed plus a purpose tag and any indices (run number, obstacle id, ...).
Streams are built with ``SeedSequence(entropy=[root, *keys])`` so that the
draws of one purpose never shift when another purpose consumes more or
fewer numbers. That is what keeps obstacle trajectories identical across the
policies compared at one sweep point.
"""
from __future__ import annotations

import numpy as np

# purpose tags
STATIC_PLACEMENT = 0
OBSTACLE_START = 1
OBSTACLE_MOVES = 2
BLOCKAGE = 3
SHADOWING = 4
ACKS = 5
SNAPSHOT = 6
EXPLORE = 7
CHANNEL = 8
RUN = 9


def substream(root: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root) & (2**64 - 1), *map(int, keys)]))


def run_seed(root: int, run: int) -> int:
    """64-bit seed for run ``run`` of a sweep, independent of the sweep point."""
    return int(np.random.SeedSequence([int(root) & (2**64 - 1), RUN, int(run)]).generate_state(1, np.uint64)[0])
