# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Morrey ball accumulation; same contract as ``_kernels_py``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline Py_ssize_t _first_ge(const double[::1] radii, double d) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = radii.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if radii[mid] < d:
            lo = mid + 1
        else:
            hi = mid
    return lo


def ball_accumulate(centers, points, fw, radii, lf, lv):
    cdef const double[:, ::1] cen = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(fw, dtype=np.float64)
    cdef const double[::1] rad = np.ascontiguousarray(radii, dtype=np.float64)
    cdef const cnp.int64_t[::1] lfv = np.ascontiguousarray(lf, dtype=np.int64)
    cdef const cnp.int64_t[::1] lvv = np.ascontiguousarray(lv, dtype=np.int64)
    cdef Py_ssize_t C = cen.shape[0], S = pts.shape[0], n = cen.shape[1], R = rad.shape[0]
    out_arr = np.zeros((C, 3, R), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] acc = np.zeros((3, R + 1), dtype=np.float64)
    cdef Py_ssize_t c, s, a, j, k, b, e1, e2
    cdef double d, t, run
    with nogil:
        for c in range(C):
            for k in range(3):
                for j in range(R + 1):
                    acc[k, j] = 0.0
            for s in range(S):
                d = 0.0
                for a in range(n):
                    t = pts[s, a] - cen[c, a]
                    d = d + t * t
                b = _first_ge(rad, sqrt(d))
                if b >= R:
                    continue
                e1 = lfv[s] if lfv[s] > b else b
                e2 = lvv[s] if lvv[s] > e1 else e1
                if b < e1:
                    acc[0, b] += w[s]
                    acc[0, e1] -= w[s]
                if e1 < e2:
                    acc[1, e1] += w[s]
                    acc[1, e2] -= w[s]
                if e2 < R:
                    acc[2, e2] += w[s]
                    acc[2, R] -= w[s]
            for k in range(3):
                run = 0.0
                for j in range(R):
                    run = run + acc[k, j]
                    out[c, k, j] = run if run > 0.0 else 0.0
    return out_arr
