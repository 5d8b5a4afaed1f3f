# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled detection kernels. Mirrors ``_kernels_py`` exactly."""

import numpy as np

from libc.math cimport INFINITY


def nearest_symbol_indices(const double complex[:, :] y,
                           const double complex[:] gains,
                           const double complex[:] symbols):
    cdef Py_ssize_t T = y.shape[0], N = y.shape[1], V = symbols.shape[0]
    cdef Py_ssize_t t, l, v, best_v
    cdef double best, dist
    cdef double complex z, g
    out = np.empty((T, N), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] o = out
    with nogil:
        for t in range(T):
            for l in range(N):
                g = gains[l]
                best = INFINITY
                best_v = 0
                for v in range(V):
                    z = y[t, l] - g * symbols[v]
                    dist = z.real * z.real + z.imag * z.imag
                    if dist < best:
                        best = dist
                        best_v = v
                o[t, l] = best_v
    return out


def update_best_candidates(const double complex[:, :] y,
                           const double complex[:, :] outputs,
                           double[::1] best_dist,
                           Py_ssize_t[::1] best_idx,
                           Py_ssize_t offset):
    cdef Py_ssize_t T = y.shape[0], N = y.shape[1], K = outputs.shape[0]
    cdef Py_ssize_t t, k, i
    cdef double dist, bd
    cdef Py_ssize_t bi
    cdef double complex z
    with nogil:
        for t in range(T):
            bd = best_dist[t]
            bi = best_idx[t]
            for k in range(K):
                dist = 0.0
                for i in range(N):
                    z = y[t, i] - outputs[k, i]
                    dist = dist + z.real * z.real + z.imag * z.imag
                    if dist >= bd:
                        break
                if dist < bd:
                    bd = dist
                    bi = offset + k
            best_dist[t] = bd
            best_idx[t] = bi
