"""Counter-based random streams for reproducible, schedule-independent sampling.

Every sampling task derives its own Philox generator from a master seed plus
a context tuple (suite name, n, seed index, point index, ...).  Identical
contexts give identical streams no matter how work is ordered or distributed
across workers, so parallel runs are bit-for-bit reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def _context_words(context) -> list[int]:
    words = []
    for item in context:
        if isinstance(item, (int, np.integer)):
            words.append(int(item) & _U64)
        elif isinstance(item, str):
            digest = hashlib.sha256(item.encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:8], "little"))
        elif isinstance(item, float):
            words.append(hash(item) & _U64)
        else:
            raise TypeError(f"unsupported rng context item: {item!r}")
    return words


def substream(master_seed: int, *context) -> np.random.Generator:
    """Return a Generator keyed by ``(master_seed, *context)``.

    The key is fed through SeedSequence, so distinct contexts give
    statistically independent Philox streams.
    """
    entropy = [int(master_seed) & _U64] + _context_words(context)
    ss = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def as_generator(seed) -> np.random.Generator:
    """Coerce an int seed or an existing Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(int(seed))
