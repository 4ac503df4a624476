# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise kernel loops (OpenMP over target rows).

Same contract as ``_kernels_py``.  Each row is reduced sequentially in
source order, so results do not depend on the thread count.
"""
import numpy as np

cimport openmp
from cython.parallel cimport prange
from libc.math cimport fabs, pow

BACKEND = "compiled"


cdef inline double _gauge_pow(const double[:, ::1] t, Py_ssize_t i,
                              const double[:, ::1] s, Py_ssize_t j,
                              int heis_n, double alpha, Py_ssize_t dim) noexcept nogil:
    cdef double h2 = 0.0, d, w, base
    cdef Py_ssize_t k
    if heis_n == 0:
        for k in range(dim):
            d = t[i, k] - s[j, k]
            h2 += d * d
        if h2 == 0.0:
            return 0.0
        return pow(h2, -0.5 * alpha)
    for k in range(2 * heis_n):
        d = t[i, k] - s[j, k]
        h2 += d * d
    w = t[i, 2 * heis_n] - s[j, 2 * heis_n]
    for k in range(heis_n):
        w += 0.5 * (t[i, k] * s[j, heis_n + k] - t[i, heis_n + k] * s[j, k])
    base = h2 * h2 + w * w
    if base == 0.0:
        return 0.0
    return pow(base, -0.25 * alpha)


cdef inline double _abs_pow(double d, double p, int ip) noexcept nogil:
    # small integer exponents avoid libm pow
    if ip == 1:
        return d
    if ip == 2:
        return d * d
    if ip == 3:
        return d * d * d
    return pow(d, p)


cdef int _team(int threads) noexcept nogil:
    return threads if threads > 0 else openmp.omp_get_max_threads()


def pair_weights(targets, sources, int heis_n, double alpha, int threads=0):
    """Dense matrix W[i, j] = |sources[j]^{-1} o targets[i]|^{-alpha}."""
    cdef const double[:, ::1] t = np.ascontiguousarray(targets, dtype=np.float64)
    cdef const double[:, ::1] s = np.ascontiguousarray(sources, dtype=np.float64)
    out = np.empty((t.shape[0], s.shape[0]))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, m = t.shape[0], n = s.shape[0], dim = t.shape[1]
    for i in prange(m, nogil=True, schedule="static", num_threads=_team(threads)):
        for j in range(n):
            o[i, j] = _gauge_pow(t, i, s, j, heis_n, alpha, dim)
    return out


def difference_rows(targets, tvals, sources, svals, int heis_n, double alpha, double p,
                    int threads=0):
    """Row sums R[i] = sum_j W[i, j] |tvals[i] - svals[j]|^p."""
    cdef const double[:, ::1] t = np.ascontiguousarray(targets, dtype=np.float64)
    cdef const double[:, ::1] s = np.ascontiguousarray(sources, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(tvals, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(svals, dtype=np.float64)
    out = np.empty(t.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, m = t.shape[0], n = s.shape[0], dim = t.shape[1]
    cdef double acc, d
    cdef int ip = <int>p if p == <int>p and 1 <= p <= 3 else 0
    for i in prange(m, nogil=True, schedule="static", num_threads=_team(threads)):
        acc = 0.0
        for j in range(n):
            d = fabs(tv[i] - sv[j])
            if d != 0.0:
                acc = acc + _gauge_pow(t, i, s, j, heis_n, alpha, dim) * _abs_pow(d, p, ip)
        o[i] = acc
    return out
