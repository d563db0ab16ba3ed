# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels; same contracts as smartcharge._kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor
from libc.stdlib cimport malloc, free
from libcpp.algorithm cimport sort

cnp.import_array()


cdef extern from *:
    """
    struct SlotKey {
        double price, moer, start;
        Py_ssize_t idx;
        bool operator<(const SlotKey& o) const {
            if (price != o.price) return price < o.price;
            if (moer != o.moer) return moer < o.moer;
            if (start != o.start) return start < o.start;
            return idx < o.idx;
        }
    };
    """
    cdef cppclass SlotKey:
        double price
        double moer
        double start
        Py_ssize_t idx


def greedy_fill(const double[::1] price, const double[::1] moer, const double[::1] start,
                const double[::1] cap, double demand):
    cdef Py_ssize_t n = cap.shape[0]
    cdef Py_ssize_t i, j
    cdef double cum = 0.0
    alloc_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] alloc = alloc_arr
    if demand <= 0.0 or n == 0:
        return alloc_arr
    cdef SlotKey* keys = <SlotKey*> malloc(n * sizeof(SlotKey))
    if keys == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            keys[i].price = price[i]
            keys[i].moer = moer[i]
            keys[i].start = start[i]
            keys[i].idx = i
        sort(keys, keys + n)
        for i in range(n):
            j = keys[i].idx
            if cum + cap[j] >= demand:
                alloc[j] = demand - cum
                return alloc_arr
            alloc[j] = cap[j]
            cum += cap[j]
        return alloc_arr
    finally:
        free(keys)


def build_cuts(double t0, double t1, double step, const double[::1] extra):
    cdef Py_ssize_t m = extra.shape[0]
    cdef Py_ssize_t n_grid = <Py_ssize_t> ((t1 - t0) / step) + 2
    out_arr = np.empty(n_grid + m + 2, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k = 0, e = 0
    cdef double g = floor(t0 / step) * step + step
    cdef double nxt, last = t0
    out[k] = t0
    k += 1
    while e < m and extra[e] <= t0:
        e += 1
    while True:
        if e < m and extra[e] < t1 and (extra[e] <= g or g >= t1):
            nxt = extra[e]
            e += 1
        elif g < t1:
            nxt = g
            g += step
        else:
            break
        if nxt > last:
            out[k] = nxt
            k += 1
            last = nxt
    out[k] = t1
    k += 1
    return out_arr[:k]
