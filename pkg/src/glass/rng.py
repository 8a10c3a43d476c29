"""Deterministic random stream derivation.

Every stochastic operation takes a 64-bit seed and derives independent
streams through SeedSequence spawn keys, so reruns are bit-identical and
distinct pipeline stages never share a stream.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# spawn-key tags for the streams a fit derives from its seed
STREAM_INIT = 0
STREAM_ITERATION = 1
STREAM_BASELINE = 2
STREAM_DRAWS = 3


def seeded_rng(seed: int, *key: int) -> np.random.Generator:
    """A generator for the stream identified by (seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                                        spawn_key=tuple(int(k) for k in key)))


def derived_seed(seed: int, *key: int) -> int:
    """A new 64-bit seed deterministically derived from (seed, key...)."""
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
