"""Named, seedable random streams.

Every consumer asks for ``stream(seed, name, index)``; the generator is keyed
by ``(seed, name, index)`` only, so a chunk of samples is reproducible no
matter which worker draws it or in what order.
"""
import numpy as np

STREAMS = {
    "dictionary": 0,
    "hidden": 1,
    "noise": 2,
    "init": 3,
    "minibatch": 4,
    "relevant": 5,
    "codebook": 6,
    "mixture": 7,
    "calibration": 8,
    "oracle": 9,
}

CHUNK = 4096


def stream(seed, name, index=0):
    key = (STREAMS[name], int(index))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def chunks(n, size=CHUNK):
    """Yield ``(chunk_index, start, stop)`` covering ``range(n)``."""
    for c, start in enumerate(range(0, n, size)):
        yield c, start, min(n, start + size)
