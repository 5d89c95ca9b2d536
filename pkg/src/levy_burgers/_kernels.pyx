# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_fallback.py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow

cnp.import_array()


cdef inline double _flux(double ul, double ur) nogil:
    cdef double a = ul if ul > 0.0 else 0.0
    cdef double b = ur if ur < 0.0 else 0.0
    a = a * a
    b = b * b
    return 0.5 * (a if a > b else b)


def godunov_update(u, double ratio):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    if n == 0:
        return out
    cdef double f_left = _flux(uv[n - 1], uv[0])
    cdef double f_first = f_left
    cdef double f_right
    with nogil:
        for i in range(n - 1):
            f_right = _flux(uv[i], uv[i + 1])
            ov[i] = uv[i] - ratio * (f_right - f_left)
            f_left = f_right
        ov[n - 1] = uv[n - 1] - ratio * (f_first - f_left)
    return out


def godunov_flux(ul, ur):
    a = np.asarray(ul, dtype=np.float64)
    b = np.asarray(ur, dtype=np.float64)
    return 0.5 * np.maximum(np.maximum(a, 0.0) ** 2, np.minimum(b, 0.0) ** 2)


def increment_power_means(diffs, powers):
    cdef const double[:, ::1] d = np.ascontiguousarray(diffs, dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(powers, dtype=np.float64)
    cdef Py_ssize_t nr = d.shape[0], g = d.shape[1], npw = p.shape[0]
    cdef Py_ssize_t i, j, x
    cdef double a, s, e
    out = np.zeros((nr, npw), dtype=np.float64)
    cdef double[:, ::1] o = out
    if g == 0:
        return out
    with nogil:
        for i in range(nr):
            for j in range(npw):
                e = p[j]
                s = 0.0
                if e == 1.0:
                    for x in range(g):
                        s += fabs(d[i, x])
                elif e == 2.0:
                    for x in range(g):
                        s += d[i, x] * d[i, x]
                elif e == 3.0:
                    for x in range(g):
                        a = fabs(d[i, x])
                        s += a * a * a
                elif e == 0.5:
                    for x in range(g):
                        s += sqrt(fabs(d[i, x]))
                else:
                    for x in range(g):
                        s += pow(fabs(d[i, x]), e)
                o[i, j] = s / g
    return out
