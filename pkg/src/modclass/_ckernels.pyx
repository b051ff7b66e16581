# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Same signatures as :mod:`modclass._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, sqrt, M_SQRT1_2

cnp.import_array()


cdef inline Py_ssize_t _bisect_left(const double[::1] t, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = t.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if t[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def region_counts(const double[:, ::1] z, const double[::1] t):
    cdef Py_ssize_t B = z.shape[0], N = z.shape[1], L = t.shape[0]
    cdef Py_ssize_t b, n
    out = np.zeros((B, L + 1), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] cnt = out
    with nogil:
        for b in range(B):
            for n in range(N):
                cnt[b, _bisect_left(t, z[b, n])] += 1
    return out


def kuiper_from_sorted_cdf(const double[:, ::1] F):
    cdef Py_ssize_t B = F.shape[0], N = F.shape[1]
    cdef Py_ssize_t b, i
    cdef double dplus, dminus, v, inv_n = 1.0 / N
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for b in range(B):
            dplus = 0.0
            dminus = 0.0
            for i in range(N):
                v = (i + 1) * inv_n - F[b, i]
                if v > dplus:
                    dplus = v
                v = F[b, i] - i * inv_n
                if v > dminus:
                    dminus = v
            res[b] = dplus + dminus
    return out


def mixture_cdf(const double[::1] z, const double[::1] means,
                const double[::1] weights, double scale):
    cdef Py_ssize_t n, m, Nz = z.shape[0], C = means.shape[0]
    cdef double acc, inv = M_SQRT1_2 / scale
    out = np.empty(Nz, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for n in range(Nz):
            acc = 0.0
            for m in range(C):
                acc += weights[m] * 0.5 * erfc(-(z[n] - means[m]) * inv)
            if acc > 1.0:
                acc = 1.0
            res[n] = acc
    return out
