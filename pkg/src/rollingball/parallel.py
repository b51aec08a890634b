"""Counter-based random streams and order-preserving parallel maps.

Work is cut into fixed-size chunks whose random stream depends only on
``(seed, chunk index)``; chunk results are combined in index order, so the
outcome is identical for any number of workers.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 16
THREADS_ENV = "ROLLINGBALL_THREADS"


def chunk_rng(seed, chunk):
    """Philox generator for one chunk; the chunk index occupies the top counter word."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(chunk)]))


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(fn, items, workers=None):
    items = list(items)
    w = worker_count(workers)
    if w == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


def chunk_bounds(total, size=CHUNK):
    return [(s, min(s + size, total)) for s in range(0, total, size)]
