"""Counter-based random streams.

Every consumer asks for a stream by ``(seed, purpose, index)``.  The seed and
purpose fix a Philox key; the index goes into the most significant counter
word, so streams never overlap and a given stream yields the same numbers no
matter how work is split across threads.
"""

from __future__ import annotations

import zlib
from functools import lru_cache

import numpy as np

# purposes keep unrelated consumers of the same seed apart
ENSEMBLE = "ensemble"
MEASURE = "measure"
SCATTER = "scatter"


@lru_cache(maxsize=64)
def _key(seed: int, purpose: str) -> tuple[int, int]:
    tag = zlib.crc32(purpose.encode())
    state = np.random.SeedSequence([int(seed) & (2**64 - 1), tag]).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, index)``."""
    if index < 0:
        raise ValueError("stream index must be non-negative")
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    key = np.array(_key(seed, purpose), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def uniforms_per_stream(seed: int, purpose: str, start: int, stop: int) -> np.ndarray:
    """First uniform deviate of each stream ``start..stop-1``."""
    return np.array([stream(seed, purpose, i).random() for i in range(start, stop)])
