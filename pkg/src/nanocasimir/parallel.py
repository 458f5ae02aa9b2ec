"""Ordered map over independent work items with an optional thread pool."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, evaluated on up to ``workers`` threads.

    Results come back in input order, so the output does not depend on the
    worker count.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
