"""Order-preserving parallel map.

The worker count comes from ``BIFINN_THREADS`` (default 1).  BLAS is pinned to
one thread everywhere so results are bitwise identical for any worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from threadpoolctl import threadpool_limits

ENV_VAR = "BIFINN_THREADS"


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_VAR, "1")))
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be an integer") from None


def _init_worker():
    threadpool_limits(1)


def pmap(fn, items, workers: int | None = None) -> list:
    items = list(items)
    workers = n_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        with threadpool_limits(1):
            return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items)), initializer=_init_worker) as ex:
        return list(ex.map(fn, items))
