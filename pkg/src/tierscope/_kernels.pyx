# cython: language_level=3
"""Compiled hot loops: regression-tree split scan and pair concordance counting.

Both functions mirror ``_kernels_py`` operation for operation so the two
backends return bit-identical results.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def best_split(const double[:, ::1] Xn, const double[::1] yn,
               const cnp.intp_t[:, ::1] order, Py_ssize_t min_leaf):
    cdef Py_ssize_t n = Xn.shape[0]
    cdef Py_ssize_t p = Xn.shape[1]
    cdef Py_ssize_t j, i, nl, nr
    cdef double total = 0.0
    cdef double sl, sr, score, v, vnext
    cdef double best = -INFINITY
    cdef Py_ssize_t best_col = -1, best_pos = -1
    cdef double best_thr = 0.0

    for i in range(n):
        total = total + yn[i]

    for j in range(p):
        sl = 0.0
        for i in range(n - 1):
            sl = sl + yn[order[i, j]]
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            v = Xn[order[i, j], j]
            vnext = Xn[order[i + 1, j], j]
            if not (v < vnext):
                continue
            sr = total - sl
            score = sl * sl / nl + sr * sr / nr
            if score > best:
                best = score
                best_col = j
                best_pos = i
                best_thr = (v + vnext) / 2.0
    return best_col, best_pos, best_thr, best


def concordance_counts(const cnp.int64_t[::1] rank, const double[::1] y):
    cdef Py_ssize_t n = rank.shape[0]
    cdef Py_ssize_t i, j
    cdef long long conc = 0, ties = 0
    for i in range(n):
        for j in range(i + 1, n):
            if y[i] == y[j]:
                ties += 1
            elif (rank[i] < rank[j]) == (y[i] < y[j]):
                conc += 1
    return conc, ties
