"""Deterministic segmented reductions, optionally spread over worker threads.

All assembly sums in this package go through ``det_sum`` / ``det_scatter``:
the input is cut into fixed-size segments, each segment is reduced on its
own, and the partial results are combined in a fixed order.  Worker threads
only decide *who* computes a segment, never the combine order, so results
are bitwise identical for any value of ``FRACVAR_THREADS``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

SEGMENT = 1 << 16

_POOLS: dict[int, ThreadPoolExecutor] = {}


def worker_count() -> int:
    """Number of worker threads, capped by the FRACVAR_THREADS env var."""
    raw = os.environ.get("FRACVAR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def _pool(n: int) -> ThreadPoolExecutor:
    if n not in _POOLS:
        _POOLS[n] = ThreadPoolExecutor(max_workers=n)
    return _POOLS[n]


def _segments(m: int) -> list[slice]:
    return [slice(i, min(i + SEGMENT, m)) for i in range(0, m, SEGMENT)]


def _combine_pairwise(parts: list) -> float:
    if not parts:
        return 0.0
    while len(parts) > 1:
        parts = [parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i]
                 for i in range(0, len(parts), 2)]
    return parts[0]


def det_sum(values: np.ndarray) -> float:
    """Sum of ``values`` with fixed segmentation and pairwise combine."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    segs = _segments(values.size)
    if not segs:
        return 0.0
    nw = worker_count()
    if nw > 1 and len(segs) > 1:
        partials = list(_pool(nw).map(lambda sl: float(np.sum(values[sl])), segs))
    else:
        partials = [float(np.sum(values[sl])) for sl in segs]
    return float(_combine_pairwise(partials))


def det_scatter(n_bins: int, slots: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Accumulate weighted index slots into ``n_bins`` bins, deterministically.

    ``slots`` is a list of (index, weight) array pairs of a common length.
    Per segment the slot bincounts are added in list order, and segments are
    accumulated in ascending order regardless of which thread ran them.
    """
    if not slots:
        return np.zeros(n_bins)
    m = slots[0][0].size
    segs = _segments(m)

    def one(sl: slice) -> np.ndarray:
        acc = np.zeros(n_bins)
        for idx, wts in slots:
            acc += np.bincount(idx[sl], weights=wts[sl], minlength=n_bins)
        return acc

    nw = worker_count()
    if nw > 1 and len(segs) > 1:
        parts = list(_pool(nw).map(one, segs))
    else:
        parts = [one(sl) for sl in segs]
    out = np.zeros(n_bins)
    for part in parts:
        out += part
    return out
