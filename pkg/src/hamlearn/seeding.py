"""Deterministic seed derivation.

One root seed expands into per-purpose streams via a counter-based split, so
adding a new consumer never shifts the streams existing consumers see.
"""

from __future__ import annotations

import numpy as np

CORPUS = 0
NETWORK_INIT = 1


def sub_rng(root_seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([root_seed, purpose])))


def sub_seed(root_seed: int, purpose: int) -> int:
    return int(np.random.SeedSequence([root_seed, purpose]).generate_state(1)[0])
