# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the sequential inner loops.

Must stay operation-for-operation identical to ``_kernels_py`` so both
backends round the recurrences the same way.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, fabs

cnp.import_array()


def ema(const double[::1] x, double alpha, Py_ssize_t start=0):
    cdef Py_ssize_t n = x.shape[0], t
    out = np.full(n, np.nan)
    cdef double[::1] o = out
    cdef double prev, beta = 1.0 - alpha
    if start >= n:
        return out
    prev = x[start]
    o[start] = prev
    for t in range(start + 1, n):
        prev = alpha * x[t] + beta * prev
        o[t] = prev
    return out


def wilder(const double[::1] x, Py_ssize_t period, Py_ssize_t start):
    cdef Py_ssize_t n = x.shape[0], t
    out = np.full(n, np.nan)
    cdef double[::1] o = out
    cdef double acc = 0.0, prev, p = <double>period, pm1 = <double>(period - 1)
    if start >= n:
        return out
    for t in range(start - period + 1, start + 1):
        acc = acc + x[t]
    prev = acc / p
    o[start] = prev
    for t in range(start + 1, n):
        prev = (prev * pm1 + x[t]) / p
        o[t] = prev
    return out


def cd_sweep(const double[::1, :] Z, double[::1] r, double[::1] gamma,
             const double[::1] pen, const double[::1] nrm2, const Py_ssize_t[::1] coords):
    cdef Py_ssize_t n = Z.shape[0], m = coords.shape[0], i, j, c
    cdef double rho, new, d, a, max_change = 0.0
    for c in range(m):
        j = coords[c]
        if nrm2[j] == 0.0:
            continue
        rho = 0.0
        for i in range(n):
            rho = rho + Z[i, j] * r[i]
        rho = rho + nrm2[j] * gamma[j]
        a = fabs(rho) - pen[j]
        if a > 0.0:
            new = (a if rho > 0.0 else -a) / nrm2[j]
        else:
            new = 0.0
        d = new - gamma[j]
        if d != 0.0:
            for i in range(n):
                r[i] = r[i] - d * Z[i, j]
            gamma[j] = new
            if fabs(d) > max_change:
                max_change = fabs(d)
    return max_change
