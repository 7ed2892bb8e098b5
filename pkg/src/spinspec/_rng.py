"""Deterministic counter-based random substreams.

Every stream is a Philox generator keyed by the run seed and an index tuple
(cell, phase point, chunk, ...). Output therefore does not depend on the order
in which streams are consumed or on how work is split across threads.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in key]])
    return np.random.Generator(np.random.Philox(ss))
