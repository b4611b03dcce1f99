# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; ``_kernels_py`` holds the numpy equivalents."""
from libc.math cimport NAN, sqrt

import numpy as np


def pairwise_distance_sum(double[:, ::1] a, double[:, ::1] b):
    """Sum of |a_i - b_j| over all pairs."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0, row, s, diff
    if b.shape[1] != d:
        raise ValueError("dimension mismatch")
    with nogil:
        for i in range(n):
            row = 0.0
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = a[i, k] - b[j, k]
                    s += diff * diff
                row += sqrt(s)
            acc += row
    return acc


def pairwise_distance_sum_self(double[:, ::1] a):
    """Sum of |a_i - a_j| over ordered pairs i != j."""
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0, row, s, diff
    with nogil:
        for i in range(n):
            row = 0.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    diff = a[i, k] - a[j, k]
                    s += diff * diff
                row += sqrt(s)
            acc += row
    return 2.0 * acc


def straightness(double[:, :, ::1] states):
    """Per-sample sum of squared steps over squared net displacement; NaN when displacement is 0."""
    cdef Py_ssize_t n_t = states.shape[0], n_s = states.shape[1], d = states.shape[2]
    cdef Py_ssize_t i, s, k
    cdef double num, den, diff
    out = np.empty(n_s)
    cdef double[::1] o = out
    with nogil:
        for s in range(n_s):
            num = 0.0
            for i in range(n_t - 1):
                for k in range(d):
                    diff = states[i + 1, s, k] - states[i, s, k]
                    num += diff * diff
            den = 0.0
            for k in range(d):
                diff = states[n_t - 1, s, k] - states[0, s, k]
                den += diff * diff
            o[s] = num / den if den > 0.0 else NAN
    return out
