"""Ordered process-pool map controlled by the QCTRL_WORKERS environment variable."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "QCTRL_WORKERS"


def worker_count(workers=None):
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, int(workers))


def ordered_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, possibly computed in worker processes.

    Results always come back in input order so reductions over them do not
    depend on the worker count.
    """
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
