"""Deterministic random-number streams.

All randomness in the toolkit flows from a single integer seed through
named sub-streams, so each pipeline stage (dataset generation, weight
init, batch shuffling) can be reproduced independently of the others.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, *names: str | int) -> np.random.Generator:
    """Return a Generator for the sub-stream identified by ``names``.

    String components are hashed with crc32, which is stable across
    platforms and Python versions; integer components (e.g. an image
    index) are used as-is.
    """
    keys = [seed & 0xFFFFFFFF]
    for name in names:
        if isinstance(name, str):
            keys.append(zlib.crc32(name.encode("utf-8")))
        else:
            keys.append(int(name) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(keys))
