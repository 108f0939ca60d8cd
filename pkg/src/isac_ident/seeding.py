"""Deterministic RNG fan-out from a single root seed.

Every stochastic stage derives its generator from the root seed plus a
path of tags, so subsystems stay statistically independent while the
whole run is reproducible from one integer.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError("seed path tags must be non-negative")
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def child_seed(root_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by ``path`` under ``root_seed``."""
    return np.random.SeedSequence(root_seed, spawn_key=tuple(_tag_int(t) for t in path))


def child_rng(root_seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(child_seed(root_seed, *path))
