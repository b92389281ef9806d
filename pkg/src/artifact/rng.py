"""Counter-based splittable random streams.

Streams are keyed by (seed, purpose words); replicas and module purposes get
independent Philox streams that are stable across platforms and process
counts.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _purpose_words(parts) -> list[int]:
    words: list[int] = []
    for part in parts:
        digest = hashlib.sha256(str(part).encode("utf-8")).digest()
        words.extend(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return words


def stream(seed: int, *purpose) -> np.random.Generator:
    """Independent generator for (seed, purpose...).

    Same arguments always give the same stream; distinct purposes give
    streams that never collide in counter space.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + _purpose_words(purpose)
    ss = np.random.SeedSequence(entropy=entropy)
    return np.random.Generator(np.random.Philox(ss))


def spawn(seed: int, purpose: str, n: int) -> list[np.random.Generator]:
    """n replica streams under one purpose."""
    return [stream(seed, purpose, k) for k in range(n)]
