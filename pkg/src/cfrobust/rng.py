"""Deterministic, splittable random sub-streams.

Every random draw in the simulator comes from a generator keyed by
``(master seed, purpose tag, indices...)`` so that results do not depend on
execution order or on how trials are distributed over workers.
"""

import zlib

import numpy as np


def _tag(purpose):
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(purpose.encode("utf-8"))


def substream(seed, purpose, *indices):
    """Return a ``numpy.random.Generator`` for one purpose/trial combination."""
    key = (_tag(purpose),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng, shape):
    """Circularly-symmetric CN(0, 1) samples."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)
