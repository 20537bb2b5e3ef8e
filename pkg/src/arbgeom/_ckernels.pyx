# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.  Semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


cdef inline bint _direction(double x, double y, double* dx, double* dy) noexcept nogil:
    cdef double p = y * y * y * (1.0 - y) * (1.0 - y)
    cdef double q = y * y * y - 2.0 * (1.0 - y) * (1.0 - y)
    cdef double norm = sqrt(q * q + p * p)
    if norm < 1e-12:
        return False
    dx[0] = q / norm
    dy[0] = -p / norm
    return True


def boyling_characteristic(double x0, double y0, double arclength, double step,
                           double xlo, double xhi, double ylo, double yhi):
    cdef Py_ssize_t cap = <Py_ssize_t>(arclength / step) + 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((cap, 2), dtype=np.float64)
    cdef double x = x0, y = y0, travelled = 0.0, h, nx, ny
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y
    cdef Py_ssize_t k = 1
    out[0, 0] = x0
    out[0, 1] = y0
    while travelled < arclength * (1.0 - 1e-15):
        h = step if step < arclength - travelled else arclength - travelled
        if not _direction(x, y, &k1x, &k1y):
            break
        if not _direction(x + 0.5 * h * k1x, y + 0.5 * h * k1y, &k2x, &k2y):
            break
        if not _direction(x + 0.5 * h * k2x, y + 0.5 * h * k2y, &k3x, &k3y):
            break
        if not _direction(x + h * k3x, y + h * k3y, &k4x, &k4y):
            break
        nx = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        ny = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if not (xlo <= nx <= xhi and ylo <= ny <= yhi):
            break
        x = nx
        y = ny
        if k == cap:
            out = np.concatenate([out, np.empty((cap, 2), dtype=np.float64)])
            cap *= 2
        out[k, 0] = x
        out[k, 1] = y
        k += 1
        travelled += h
    return out[:k].copy()


def bellman_ford(Py_ssize_t n_nodes, const cnp.int64_t[:] src, const cnp.int64_t[:] dst,
                 const double[:] weight, double delta):
    cdef Py_ssize_t m = src.shape[0], e, r
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.zeros(n_nodes, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pred = np.full(n_nodes, -1, dtype=np.int64)
    cdef double cand
    cdef bint changed
    for r in range(n_nodes):
        changed = False
        for e in range(m):
            cand = dist[src[e]] + weight[e]
            if cand < dist[dst[e]] - delta:
                dist[dst[e]] = cand
                pred[dst[e]] = src[e]
                changed = True
        if not changed:
            break
    candidates = []
    for e in range(m):
        if dist[src[e]] + weight[e] < dist[dst[e]] - delta:
            candidates.append(dst[e])
    return pred, np.array(candidates, dtype=np.int64)


def assign_classes(const double[:, :] profiles, double tol):
    cdef Py_ssize_t n = profiles.shape[0], g = profiles.shape[1]
    cdef Py_ssize_t i, j, c, n_reps = 0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] reps = np.empty(max(n, 1), dtype=np.int64)
    cdef bint match
    for i in range(n):
        labels[i] = -1
        for c in range(n_reps):
            match = True
            for j in range(g):
                if fabs(profiles[i, j] - profiles[reps[c], j]) > tol:
                    match = False
                    break
            if match:
                labels[i] = c
                break
        if labels[i] < 0:
            reps[n_reps] = i
            labels[i] = n_reps
            n_reps += 1
    return labels
