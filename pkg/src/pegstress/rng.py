"""Counter-based random substreams.

Every (seed, trial, channel) triple owns an independent Philox stream;
position ``t`` of that stream is day ``t``.  A draw therefore depends only
on (seed, trial, channel, day), never on how trials are batched or which
worker runs them.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

# Fixed channel order within a day.
CHANNELS = ("volume", "failure", "frozen", "redemption", "redemption_size", "noise")
_INDEX = {name: i for i, name in enumerate(CHANNELS)}


def substream(seed: int, trial: int, channel: str) -> Generator:
    if seed < 0 or trial < 0:
        raise ValueError("seed and trial index must be non-negative")
    ss = SeedSequence(seed, spawn_key=(trial, _INDEX[channel]))
    return Generator(Philox(ss))


def channel_draws(seed: int, trial: int, days: int) -> dict[str, np.ndarray]:
    """Raw variates for one trial: standard normals or uniforms per channel."""
    out = {}
    for name in CHANNELS:
        g = substream(seed, trial, name)
        if name in ("failure", "redemption"):
            out[name] = g.random(days)
        else:
            out[name] = g.standard_normal(days)
    return out
