# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-scan and scatter kernels.

Signatures and results match :mod:`pocketdiff._kernels_py`.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def pairs_within(const double[:, ::1] a, const double[:, ::1] b, double cutoff):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i, j, k = 0, cap = 64
    cdef double dx, dy, dz, c2 = cutoff * cutoff
    cdef cnp.ndarray[cnp.int64_t, ndim=2] out = np.empty((cap, 2), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            dz = a[i, 2] - b[j, 2]
            if dx * dx + dy * dy + dz * dz <= c2:
                if k == cap:
                    cap *= 2
                    out = np.resize(out, (cap, 2))
                out[k, 0] = i
                out[k, 1] = j
                k += 1
    return out[:k].copy()


def min_distances(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, d2, best
    out = np.full(n, np.inf)
    cdef double[::1] o = out
    for i in range(n):
        best = np.inf
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            dz = a[i, 2] - b[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
        o[i] = best ** 0.5
    return out


def clash_pairs(const double[:, ::1] a, const double[:, ::1] b,
                const double[::1] ra, const double[::1] rb, double factor):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i, j, k = 0, cap = 16
    cdef double dx, dy, dz, lim
    cdef cnp.ndarray[cnp.int64_t, ndim=2] out = np.empty((cap, 2), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            dz = a[i, 2] - b[j, 2]
            lim = factor * (ra[i] + rb[j])
            if dx * dx + dy * dy + dz * dz < lim * lim:
                if k == cap:
                    cap *= 2
                    out = np.resize(out, (cap, 2))
                out[k, 0] = i
                out[k, 1] = j
                k += 1
    return out[:k].copy()


def segment_sum(const double[:, ::1] values, const cnp.int64_t[::1] index, Py_ssize_t n):
    cdef Py_ssize_t e = values.shape[0], d = values.shape[1]
    cdef Py_ssize_t i, k
    out = np.zeros((n, d))
    cdef double[:, ::1] o = out
    for i in range(e):
        for k in range(d):
            o[index[i], k] += values[i, k]
    return out
