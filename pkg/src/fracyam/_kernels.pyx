# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the loops in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def thomas_batched(lower, diag, upper, rhs):
    cdef double[:, ::1] a = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(upper, dtype=np.float64)
    cdef double[:, ::1] d = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t B = d.shape[0], m = d.shape[1], i, j
    out = np.empty((B, m), dtype=np.float64)
    cdef double[:, ::1] x = out
    cdef double[::1] cp = np.empty(m, dtype=np.float64)
    cdef double den
    with nogil:
        for i in range(B):
            cp[0] = c[i, 0] / b[i, 0]
            x[i, 0] = d[i, 0] / b[i, 0]
            for j in range(1, m):
                den = b[i, j] - a[i, j] * cp[j - 1]
                cp[j] = c[i, j] / den
                x[i, j] = (d[i, j] - a[i, j] * x[i, j - 1]) / den
            for j in range(m - 2, -1, -1):
                x[i, j] = x[i, j] - cp[j] * x[i, j + 1]
    return out


def element_apply(U, coef, k00, k01, k11):
    cdef double[:, ::1] u = np.ascontiguousarray(U, dtype=np.float64)
    cdef double[:, ::1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double[::1] a00 = np.ascontiguousarray(k00, dtype=np.float64)
    cdef double[::1] a01 = np.ascontiguousarray(k01, dtype=np.float64)
    cdef double[::1] a11 = np.ascontiguousarray(k11, dtype=np.float64)
    cdef Py_ssize_t P = u.shape[0], m = cf.shape[1], p, e
    out = np.zeros((P, m + 1), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef double ul, ur, w
    with nogil:
        for p in range(P):
            for e in range(m):
                w = cf[p, e]
                ul = u[p, e]
                ur = u[p, e + 1]
                y[p, e] += w * (a00[e] * ul + a01[e] * ur)
                y[p, e + 1] += w * (a01[e] * ul + a11[e] * ur)
    return out
