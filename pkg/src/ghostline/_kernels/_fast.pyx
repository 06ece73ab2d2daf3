# cython: boundscheck=False, wraparound=False
"""Compiled distribution-fill kernel.

Single pass per backoff level, in the same elementwise order as the numpy
fallback so results are bit-identical.
"""

import numpy as np


def fill_distribution(double[::1] unigram, list levels):
    cdef Py_ssize_t V = unigram.shape[0]
    out_arr = np.empty(V, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] probs
    cdef int[::1] ids
    cdef double bow
    cdef Py_ssize_t i, j, n
    for i in range(V):
        out[i] = unigram[i]
    for level in levels:
        ids = level[0]
        probs = level[1]
        bow = level[2]
        for i in range(V):
            out[i] = out[i] * bow
        n = ids.shape[0]
        for j in range(n):
            out[ids[j]] = probs[j]
    return out_arr
