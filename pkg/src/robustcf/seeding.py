"""Deterministic named random substreams.

All randomness in an experiment flows from one root seed. Subsystems
(splitting, model init, attack generation, ...) draw from substreams
derived from the root seed plus a name path, so any part of a run can be
reproduced in isolation and reordering one subsystem never perturbs
another.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK32 = 0xFFFFFFFF


def substream_words(root_seed: int, *path) -> list[int]:
    """Derive entropy words for SeedSequence from a root seed and a name path."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    digest = h.digest()
    words = [int.from_bytes(digest[i : i + 4], "little") & _MASK32 for i in range(0, 16, 4)]
    return [int(root_seed) & _MASK32] + words


def substream_seed(root_seed: int, *path) -> int:
    """A single integer seed for APIs that take one (split, attack specs)."""
    return substream_words(root_seed, *path)[-1]


def substream(root_seed: int, *path) -> np.random.Generator:
    """Generator seeded from the named substream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(substream_words(root_seed, *path))))
