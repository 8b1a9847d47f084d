# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled light-cone recursions.

Every cone sum accumulates ``(0.5 * z[j]) * w[j]`` over contributing atoms in
increasing index order, starting from 0.0. ``_fallback.py`` follows the same
order so both backends agree bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef void _recursion_naive(const double[::1] s, const double[::1] y, const double[::1] z,
                           const double[::1] source, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc, si, yi
    for i in range(n):
        acc = 0.0
        si = s[i]
        yi = y[i]
        for j in range(i):
            if fabs(yi - y[j]) < si - s[j]:
                acc += (0.5 * z[j]) * out[j]
        out[i] = source[i] + acc


cdef int _recursion_indexed(const double[::1] s, const double[::1] y, const double[::1] z,
                            const double[::1] source, double[::1] out,
                            const Py_ssize_t[::1] cell, Py_ssize_t n_cells) noexcept nogil:
    # Cells a little wider than H = s[n-1] - s[0] partition y. Cone
    # half-widths never exceed H, so atom i only sees its own cell and the
    # two neighbours. Neighbourhood c lists every atom of cells c-1, c, c+1;
    # filling it in index order keeps it sorted, so scanning it up to i
    # visits candidates in the same order as the naive loop.
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i, j, c, k, d, stop
    cdef double acc, si, yi
    cdef Py_ssize_t *offset = <Py_ssize_t *> malloc((n_cells + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *fill = <Py_ssize_t *> malloc((n_cells + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *members = <Py_ssize_t *> malloc((3 * n + 1) * sizeof(Py_ssize_t))
    if offset == NULL or fill == NULL or members == NULL:
        free(offset)
        free(fill)
        free(members)
        return -1
    for c in range(n_cells + 1):
        fill[c] = 0
    for j in range(n):
        for d in range(-1, 2):
            c = cell[j] + d
            if 0 <= c < n_cells:
                fill[c] += 1
    offset[0] = 0
    for c in range(n_cells):
        offset[c + 1] = offset[c] + fill[c]
        fill[c] = offset[c]
    for j in range(n):
        for d in range(-1, 2):
            c = cell[j] + d
            if 0 <= c < n_cells:
                members[fill[c]] = j
                fill[c] += 1
    for i in range(n):
        si = s[i]
        yi = y[i]
        c = cell[i]
        stop = offset[c + 1]
        acc = 0.0
        for k in range(offset[c], stop):
            j = members[k]
            if j >= i:
                break
            if fabs(yi - y[j]) < si - s[j]:
                acc += (0.5 * z[j]) * out[j]
        out[i] = source[i] + acc
    free(offset)
    free(fill)
    free(members)
    return 0


def cone_recursion(s, y, z, source, Py_ssize_t index_threshold=4096):
    """``out[i] = source[i] + sum_{j < i, |y_i - y_j| < s_i - s_j} 0.5 z_j out[j]``."""
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] src = np.ascontiguousarray(source, dtype=np.float64)
    cdef Py_ssize_t n = sv.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const Py_ssize_t[::1] cell
    cdef Py_ssize_t n_cells = 0
    cdef int status = 0
    if n > index_threshold and n > 1 and sv[n - 1] > sv[0]:
        ya = np.asarray(yv)
        y0 = float(ya.min())
        # the margin keeps |y_i - y_j| < H from rounding into a cell two away
        width = (sv[n - 1] - sv[0]) * (1.0 + 1e-9)
        n_cells = min(int((float(ya.max()) - y0) / width) + 1, n)
        width = max(width, (float(ya.max()) - y0) / n_cells * (1.0 + 1e-9))
        cells = np.minimum(((ya - y0) / width).astype(np.intp), n_cells - 1)
        cell = cells
        with nogil:
            status = _recursion_indexed(sv, yv, zv, src, out, cell, n_cells)
        if status != 0:
            raise MemoryError("could not allocate the candidate buffer")
    else:
        with nogil:
            _recursion_naive(sv, yv, zv, src, out)
    return out_arr


def cone_sum(s, y, z, w, double t, double x):
    """``sum_{s_i < t, |x - y_i| < t - s_i} 0.5 z_i w_i`` in index order."""
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, n = sv.shape[0]
    cdef double acc = 0.0
    with nogil:
        for i in range(n):
            if sv[i] >= t:
                break
            if fabs(x - yv[i]) < t - sv[i]:
                acc += (0.5 * zv[i]) * wv[i]
    return acc
