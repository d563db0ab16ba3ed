"""NumPy implementations of the inner-loop kernels (used when the compiled core is absent)."""

from __future__ import annotations

import numpy as np


def greedy_fill(
    price: np.ndarray, moer: np.ndarray, start: np.ndarray, cap: np.ndarray, demand: float
) -> np.ndarray:
    """Energy per slot after filling slots in (price, moer, start) order until demand is met."""
    order = np.lexsort((start, moer, price))
    cum = np.cumsum(cap[order])
    alloc = np.zeros(cap.shape[0])
    if demand <= 0.0 or cap.shape[0] == 0:
        return alloc
    k = int(np.searchsorted(cum, demand, side="left"))
    if k >= cap.shape[0]:
        alloc[:] = cap
        return alloc
    alloc[order[:k]] = cap[order[:k]]
    alloc[order[k]] = demand - (cum[k - 1] if k else 0.0)
    return alloc


def build_cuts(t0: float, t1: float, step: float, extra: np.ndarray) -> np.ndarray:
    """Sorted unique edges of [t0, t1] cut at multiples of ``step`` and at ``extra`` points."""
    grid = np.arange(np.floor(t0 / step) * step + step, t1, step)
    inner = np.concatenate((grid[grid > t0], extra[(extra > t0) & (extra < t1)]))
    return np.unique(np.concatenate(([t0], inner, [t1])))
