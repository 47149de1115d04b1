"""Reproducible random number streams.

All randomness in the toolkit flows through Philox, a 64-bit counter-based
generator whose output is identical across platforms and numpy builds.
Sub-streams are derived from a master seed plus a tuple of small integers
(the "stream path"), so independent components never share or race on a
generator.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "derive_seed"]

# fixed role tags for stream paths, so call sites do not invent collisions
STREAM_GIBBS = 1
STREAM_CODEBOOK = 2
STREAM_NULL = 3
STREAM_SPLIT = 4
STREAM_SYNTH = 5
STREAM_FIT = 6


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Return a Philox generator for the sub-stream `path` under `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Derive a 63-bit child seed; used when an API takes a seed, not a stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
