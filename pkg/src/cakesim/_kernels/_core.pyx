# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot inner loops.

Mirrors `_fallback` operation for operation; see that module for the
cross-backend parity contract.
"""

import numpy as np

from libc.math cimport log
from libc.stdlib cimport free, malloc, qsort


def row_entropy_sum(values):
    """Sum of -x*ln(x) over all entries, with 0*ln(0) taken as 0."""
    cdef double[:, ::1] m = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double total = 0.0
    cdef double x
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            x = m[i, j]
            if x > 0.0:
                total += x * log(x)
    return -total


def column_mean_var(values):
    """Per-column mean and population variance of a 2-D array."""
    cdef double[:, ::1] m = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t cols = m.shape[1]
    cdef Py_ssize_t i, j
    if rows == 0:
        raise ValueError("column_mean_var requires at least one row")
    mean_arr = np.zeros(cols, dtype=np.float64)
    var_arr = np.zeros(cols, dtype=np.float64)
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    cdef double d
    for i in range(rows):
        for j in range(cols):
            mean[j] += m[i, j]
    for j in range(cols):
        mean[j] /= rows
    for i in range(rows):
        for j in range(cols):
            d = m[i, j] - mean[j]
            var[j] += d * d
    for j in range(cols):
        var[j] /= rows
    return mean_arr, var_arr


def pool1d(scores, kernel, use_max):
    """Sliding-window max/average pooling with truncated edge windows."""
    cdef double[::1] x = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = kernel
    cdef bint is_max = use_max
    cdef Py_ssize_t i, j, lo, hi, half
    cdef double best, acc
    if k < 1 or k % 2 == 0:
        raise ValueError("pool kernel must be a positive odd integer")
    out_arr = np.empty(n, dtype=np.float64)
    if k == 1 or n == 0:
        out_arr[:] = np.asarray(x)
        return out_arr
    cdef double[::1] out = out_arr
    half = k // 2
    for i in range(n):
        lo = i - half
        if lo < 0:
            lo = 0
        hi = i + half + 1
        if hi > n:
            hi = n
        if is_max:
            best = x[lo]
            for j in range(lo + 1, hi):
                if x[j] > best:
                    best = x[j]
            out[i] = best
        else:
            acc = 0.0
            for j in range(lo, hi):
                acc += x[j]
            out[i] = acc / (hi - lo)
    return out_arr


cdef struct ScoredIdx:
    double score
    Py_ssize_t idx


cdef int _cmp_scored(const void* a, const void* b) noexcept nogil:
    cdef const ScoredIdx* pa = <const ScoredIdx*> a
    cdef const ScoredIdx* pb = <const ScoredIdx*> b
    if pa.score < pb.score:
        return 1
    if pa.score > pb.score:
        return -1
    if pa.idx < pb.idx:
        return 1
    if pa.idx > pb.idx:
        return -1
    return 0


def topk_finite(scores, k):
    """Indices of the k largest scores, ties broken toward higher index."""
    cdef double[::1] x = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t kk = k
    cdef Py_ssize_t i
    if kk <= 0:
        return np.empty(0, dtype=np.int64)
    if kk >= n:
        return np.arange(n, dtype=np.int64)
    cdef ScoredIdx* items = <ScoredIdx*> malloc(n * sizeof(ScoredIdx))
    if items == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            items[i].score = x[i]
            items[i].idx = i
        qsort(items, n, sizeof(ScoredIdx), _cmp_scored)
        out = np.empty(kk, dtype=np.int64)
        for i in range(kk):
            out[i] = items[i].idx
    finally:
        free(items)
    return np.sort(out)
