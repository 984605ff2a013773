# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every function here has a numpy twin in :mod:`gcica._kernels_py` with the
same signature and the same output up to floating-point summation order;
:mod:`gcica.kernels` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t i) noexcept nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


cdef inline void _union(Py_ssize_t[::1] parent, Py_ssize_t[::1] size,
                        Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a == b:
        return
    if size[a] < size[b]:
        a, b = b, a
    parent[b] = a
    size[a] += size[b]


def threshold_components(const double[:, ::1] m, double threshold, bint strict):
    """Label connected components of the graph {(i, j): m[i, j] > thr} (strict)
    or {m[i, j] >= thr}. Only the upper triangle is read.

    Labels are canonical: numbered 0, 1, ... in order of each component's
    smallest node index.
    """
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t i, j, r, nxt = 0
    parent_arr = np.arange(n, dtype=np.intp)
    size_arr = np.ones(n, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    cdef Py_ssize_t[::1] size = size_arr
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if strict:
                    if m[i, j] > threshold:
                        _union(parent, size, i, j)
                elif m[i, j] >= threshold:
                    _union(parent, size, i, j)
    labels_arr = np.full(n, -1, dtype=np.intp)
    remap_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] labels = labels_arr
    cdef Py_ssize_t[::1] remap = remap_arr
    for i in range(n):
        r = _find(parent, i)
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        labels[i] = remap[r]
    return labels_arr


def knn_match_sums(const Py_ssize_t[:, ::1] nbrs, const double[:, ::1] vals,
                   const Py_ssize_t[:, ::1] labels):
    """Cumulative same-label neighbour sums for a batch of label vectors.

    out[p, k-1] = sum_i sum_{j < k} vals[i, j] * [labels[p, i] == labels[p, nbrs[i, j]]]
    """
    cdef Py_ssize_t n_lab = labels.shape[0]
    cdef Py_ssize_t m = nbrs.shape[0]
    cdef Py_ssize_t kmax = nbrs.shape[1]
    cdef Py_ssize_t p, i, j
    cdef double acc
    out_arr = np.zeros((n_lab, kmax), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for p in range(n_lab):
            for i in range(m):
                for j in range(kmax):
                    if labels[p, i] == labels[p, nbrs[i, j]]:
                        out[p, j] += vals[i, j]
            acc = 0.0
            for j in range(kmax):
                acc += out[p, j]
                out[p, j] = acc
    return out_arr


def prox_columns(const double[:, ::1] z, double threshold, const double[::1] target):
    """Soft-threshold, clamp at zero, then rescale each column to norm target[i].

    A column annihilated by the threshold falls back to the clamped,
    unthresholded column; if that is zero too, all mass goes to the row with
    the largest pre-threshold entry (lowest index on ties).
    """
    cdef Py_ssize_t kk = z.shape[0]
    cdef Py_ssize_t n = z.shape[1]
    cdef Py_ssize_t r, c, best
    cdef double v, norm2, scale, bestv
    out_arr = np.zeros((kk, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for c in range(n):
            norm2 = 0.0
            for r in range(kk):
                v = z[r, c] - threshold
                if v < 0.0:
                    v = 0.0
                out[r, c] = v
                norm2 += v * v
            if norm2 == 0.0:
                for r in range(kk):
                    v = z[r, c]
                    if v < 0.0:
                        v = 0.0
                    out[r, c] = v
                    norm2 += v * v
            if norm2 == 0.0:
                best = 0
                bestv = z[0, c]
                for r in range(1, kk):
                    if z[r, c] > bestv:
                        bestv = z[r, c]
                        best = r
                out[best, c] = target[c]
                continue
            scale = target[c] / sqrt(norm2)
            for r in range(kk):
                out[r, c] *= scale
    return out_arr
