# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Semantics match ``_purepy`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITERATION_LIMIT = 2


def rgs_table(int d, Py_ssize_t count):
    cdef cnp.ndarray[cnp.int8_t, ndim=2] out = np.zeros((count, d), dtype=np.int8)
    cdef signed char[:, ::1] o = out
    cdef signed char[64] a
    cdef signed char[64] prefix_max
    cdef Py_ssize_t row
    cdef int i, j
    if d > 64:
        raise ValueError("d too large for the compiled kernel")
    for i in range(d):
        a[i] = 0
        prefix_max[i] = 0
    for row in range(count):
        for j in range(d):
            o[row, j] = a[j]
        i = d - 1
        while i > 0 and a[i] > prefix_max[i - 1]:
            i -= 1
        if i == 0:
            break
        a[i] += 1
        prefix_max[i] = prefix_max[i - 1] if prefix_max[i - 1] > a[i] else a[i]
        for j in range(i + 1, d):
            a[j] = 0
            prefix_max[j] = prefix_max[i]
    return out


cdef void _pivot(double[:, ::1] T, Py_ssize_t p, Py_ssize_t q) nogil:
    cdef Py_ssize_t nrow = T.shape[0]
    cdef Py_ssize_t ncol = T.shape[1]
    cdef Py_ssize_t i, j
    cdef double piv = T[p, q]
    cdef double f
    for j in range(ncol):
        T[p, j] = T[p, j] / piv
    for i in range(nrow):
        if i == p:
            continue
        f = T[i, q]
        if f == 0.0:
            continue
        for j in range(ncol):
            T[i, j] = T[i, j] - f * T[p, j]


def pivot(double[:, ::1] T, Py_ssize_t p, Py_ssize_t q):
    _pivot(T, p, q)


def pivot_loop(double[:, ::1] T, cnp.int64_t[::1] basis, allowed, double eps,
               Py_ssize_t max_iter):
    cdef cnp.uint8_t[::1] ok = np.ascontiguousarray(allowed, dtype=np.uint8)
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t n = T.shape[1] - 1
    cdef Py_ssize_t rhs = n
    cdef Py_ssize_t it = 0
    cdef Py_ssize_t i, j, p, q
    cdef double ratio, best
    with nogil:
        while True:
            q = -1
            for j in range(n):
                if ok[j] and T[m, j] < -eps:
                    q = j
                    break
            if q < 0:
                with gil:
                    return OPTIMAL, it
            if it >= max_iter:
                with gil:
                    return ITERATION_LIMIT, it
            p = -1
            best = 0.0
            for i in range(m):
                if T[i, q] > eps:
                    ratio = T[i, rhs] / T[i, q]
                    if p < 0 or ratio < best or (ratio == best and basis[i] < basis[p]):
                        p = i
                        best = ratio
            if p < 0:
                with gil:
                    return UNBOUNDED, it
            _pivot(T, p, q)
            basis[p] = q
            it += 1
