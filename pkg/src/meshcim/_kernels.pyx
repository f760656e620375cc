# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: exact integer versions of the numpy fallbacks."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def mvm_batch(cnp.int8_t[:, ::1] x, cnp.int8_t[:, ::1] w):
    """(n, C) int8 x (C, M) int8 -> (n, M) int32."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    cdef Py_ssize_t m = w.shape[1]
    out_arr = np.zeros((n, m), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef cnp.int32_t xv
    # branch-free inner loop so the compiler can vectorize it
    for i in range(n):
        for k in range(c):
            xv = x[i, k]
            for j in range(m):
                out[i, j] += xv * w[k, j]
    return out_arr


def scatter_accumulate(cnp.int32_t[:, ::1] acc, cnp.int64_t[:] idx, cnp.int32_t[:, ::1] add):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t m = add.shape[1]
    cdef Py_ssize_t i, j, row
    for i in range(n):
        row = idx[i]
        for j in range(m):
            acc[row, j] += add[i, j]


def relu_shift_sat8(cnp.int32_t[:, ::1] acc, int shift, bint relu):
    cdef Py_ssize_t n = acc.shape[0]
    cdef Py_ssize_t m = acc.shape[1]
    out_arr = np.empty((n, m), dtype=np.int8)
    cdef cnp.int8_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef cnp.int32_t v, lo
    lo = 0 if relu else -128
    for i in range(n):
        for j in range(m):
            v = acc[i, j]
            if relu and v < 0:
                v = 0
            v = v >> shift
            v = 127 if v > 127 else v
            v = -128 if v < -128 else v
            out[i, j] = <cnp.int8_t> v
    return out_arr


def lane_max(a, b):
    return np.maximum(a, b)


def sat_add8(cnp.int8_t[:, ::1] a, cnp.int8_t[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    out_arr = np.empty((n, m), dtype=np.int8)
    cdef cnp.int8_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int v
    for i in range(n):
        for j in range(m):
            v = a[i, j] + b[i, j]
            if v > 127:
                v = 127
            elif v < -128:
                v = -128
            out[i, j] = <cnp.int8_t> v
    return out_arr
