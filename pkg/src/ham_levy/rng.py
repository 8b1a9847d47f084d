"""Deterministic per-path random streams.

Each path gets its own Philox (counter-based) generator whose key is a hash
of ``(master_seed, path_index, stream)``; adding paths or changing the
scheduling never perturbs the stream of an existing path.
"""

import numpy as np


def path_key(master_seed: int, index: int, stream: int = 0) -> np.ndarray:
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index), int(stream)])
    return seq.generate_state(2, dtype=np.uint64)


def path_generator(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=path_key(master_seed, index, stream)))
