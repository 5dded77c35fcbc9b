"""Seed handling shared by every stochastic routine.

Child seeds are derived from a root seed with ``numpy.random.SeedSequence``:
the spawn key is ``(crc32(stage), index)``, so a stage's streams depend only on
the root seed, the stage name and the item index, never on execution order.
"""

from __future__ import annotations

import zlib
from typing import List, Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


def rng_from(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seed(root_seed: int, stage: str, index: int = 0) -> int:
    key = (zlib.crc32(stage.encode("utf-8")), int(index))
    seq = np.random.SeedSequence(int(root_seed), spawn_key=key)
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def point_seeds(seed: SeedLike, stage: str, count: int) -> List[int]:
    """One integer seed per point: child seeds for an int root, draws otherwise."""
    if isinstance(seed, (int, np.integer)):
        return [child_seed(int(seed), stage, k) for k in range(count)]
    rng = rng_from(seed)
    return [int(v) for v in rng.integers(0, 2**63 - 1, size=count)]
