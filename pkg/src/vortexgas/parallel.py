"""Worker-count independent fan-out.

Work is always split into the same blocks regardless of how many workers run
them, and results come back in block order, so every reduction downstream sees
identical inputs whether it ran on one core or many.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def max_workers() -> int:
    env = os.environ.get("VORTEXGAS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally across processes."""
    items = list(items)
    w = max_workers() if workers is None else workers
    w = min(w, len(items))
    if w <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))
