# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel sums for the singular quadrature engine.

Same contracts as ``_kernels_fallback``: serial fixed-order loops so
results are reproducible run to run.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt

cnp.import_array()


def inv_dist_power_sum(double[:, ::1] X, double[:, ::1] Y, double[::1] coeff,
                       double power, double guard=0.0):
    cdef Py_ssize_t m = X.shape[0], n = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double d2, diff, acc, g2 = guard * guard, halfp = 0.5 * power
    out_arr = np.zeros(m)
    cdef double[::1] out = out_arr
    for i in range(m):
        acc = 0.0
        for j in range(n):
            d2 = 0.0
            for k in range(d):
                diff = X[i, k] - Y[j, k]
                d2 += diff * diff
            if d2 > g2:
                acc += coeff[j] * pow(d2, -halfp)
        out[i] = acc
    return out_arr


def tk_component_sum(double[:, ::1] X, double[:, ::1] Y, double[::1] coeff,
                     Py_ssize_t k_index, double power, double guard=0.0):
    cdef Py_ssize_t m = X.shape[0], n = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double d2, diff, acc, comp, g2 = guard * guard, halfp = 0.5 * power
    out_arr = np.zeros(m)
    cdef double[::1] out = out_arr
    for i in range(m):
        acc = 0.0
        for j in range(n):
            d2 = 0.0
            for k in range(d):
                diff = X[i, k] - Y[j, k]
                d2 += diff * diff
            if d2 > g2:
                comp = X[i, k_index] - Y[j, k_index]
                acc += coeff[j] * comp * pow(d2, -halfp)
        out[i] = acc
    return out_arr


def inv_dist_power_matrix(double[:, ::1] X, double[:, ::1] Y, double power,
                          double guard=0.0):
    cdef Py_ssize_t m = X.shape[0], n = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double d2, diff, g2 = guard * guard, halfp = 0.5 * power
    out_arr = np.zeros((m, n))
    cdef double[:, ::1] out = out_arr
    for i in range(m):
        for j in range(n):
            d2 = 0.0
            for k in range(d):
                diff = X[i, k] - Y[j, k]
                d2 += diff * diff
            if d2 > g2:
                out[i, j] = pow(d2, -halfp)
    return out_arr
