"""
Named random sub-streams derived from one run seed

Every consumer of randomness asks for its own stream by name (``init/freq_24``, ``noise``,
``shuffle``, ``subsample``...), so components can be reproduced independently of each other
and of the order in which they run.
"""
import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """
    Get a generator for the named sub-stream of a run seed
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
