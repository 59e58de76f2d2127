"""Deterministic random streams.

All randomness in this package flows through Philox-4x64, a counter-based
64-bit generator whose output depends only on its 128-bit key.  Streams are
split by key, never by drawing order: the key packs (seed, purpose,
realization), so adding a consumer of one purpose can never perturb the draws
seen by another.  Identical keys give identical samples on every platform.
"""

from __future__ import annotations

import numpy as np

# Stable purpose codes.  New purposes must be appended, never renumbered,
# or previously published seeds would change meaning.
PURPOSES = {
    "topology": 0,  # once-per-scenario structural draws (limits, capacities)
    "state": 1,     # per-slot state samples during simulation
    "oracle": 2,    # sample-average-approximation draws
    "probe": 3,     # diagnostic sampling (structural checks, spot tests)
}

_MASK64 = (1 << 64) - 1


def stream(seed: int, realization: int = 0, purpose: str = "state") -> np.random.Generator:
    """Return the generator for one (seed, realization, purpose) stream.

    Parameters
    ----------
    seed : int
        User-facing seed; folded to 64 bits.
    realization : int
        Monte Carlo realization index, 0 <= realization < 2**32.
    purpose : str
        One of the keys of ``PURPOSES``.

    Returns
    -------
    numpy.random.Generator backed by Philox-4x64.
    """
    if purpose not in PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}; known: {sorted(PURPOSES)}")
    if not 0 <= realization < 2**32:
        raise ValueError(f"realization index {realization} outside [0, 2**32)")
    key = np.array(
        [int(seed) & _MASK64, (PURPOSES[purpose] << 32) | realization],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
