"""Order-preserving worker pool for forward-model evaluations.

Thread-based: the compiled FDTD kernel releases the GIL, so concurrent
simulations genuinely overlap; with the pure-Python kernel threads cost
nothing and results stay byte-identical either way because every reduction
happens in submission order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


class WorkerPool:
    """An ordered ``map`` over N worker threads (N=1 runs inline)."""

    def __init__(self, workers: int | None = None):
        if workers is None:
            workers = os.cpu_count() or 1
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def map(self, fn, items):
        items = list(items)
        if self._pool is None or len(items) <= 1:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
