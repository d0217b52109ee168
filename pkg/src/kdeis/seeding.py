"""Counter-based replicate seeding and order-preserving parallel maps."""

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import InvalidParameterError

__all__ = ["replicate_seed", "replicate_rng", "parallel_map"]


def replicate_seed(master_seed, experiment, *indices):
    """Seed sequence keyed by ``(experiment, *indices)`` under ``master_seed``.

    The key is a pure function of its arguments, so a replicate gets the
    same stream no matter which worker runs it or in which order.
    """
    if int(master_seed) != master_seed or not 0 <= master_seed < 2**64:
        raise InvalidParameterError("master_seed must be an unsigned 64-bit integer")
    key = (zlib.crc32(str(experiment).encode("utf-8")),) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def replicate_rng(master_seed, experiment, *indices):
    return np.random.Generator(np.random.PCG64(replicate_seed(master_seed, experiment, *indices)))


def parallel_map(fn, items, threads=1):
    """``[fn(x) for x in items]``, optionally on a thread pool; order kept."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
