# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled hole-expansion kernels; same contract as `_kernels_py`."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()

IMPLEMENTATION = "cython"

cdef enum:
    LAM = 0
    APP = 1
    VAR = 2
    PRIM = 4


def split_hole(const int64_t[::1] o, const int64_t[::1] roots, int64_t depth,
               const int64_t[::1] kind, const int64_t[::1] a,
               const int64_t[::1] fvmin, const int64_t[::1] wcost):
    cdef Py_ssize_t n = o.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t node, k, key, w
    cdef int64_t maxp = -1, maxv = -1
    cdef Py_ssize_t napp = 0, nlam = 0, nalpha = 0
    cdef int64_t bapp = 0, blam = 0, balpha = 0
    free = None

    for i in range(n):
        node = o[i]
        k = kind[node]
        if k == PRIM:
            if a[node] > maxp:
                maxp = a[node]
        elif k == VAR:
            key = a[node]
            if key < depth:
                if key > maxv:
                    maxv = key
            else:
                if free is None:
                    free = set()
                free.add(key)
        elif k == APP:
            napp += 1
        elif k == LAM:
            nlam += 1
        if fvmin[node] >= depth:
            nalpha += 1

    cdef cnp.ndarray[int64_t, ndim=1] pcount = np.zeros(maxp + 2, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] vcount = np.zeros(maxv + 2, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] pbound = np.zeros(maxp + 2, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] vbound = np.zeros(maxv + 2, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] app_rows = np.empty(napp, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] lam_rows = np.empty(nlam, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] alpha_rows = np.empty(nalpha, dtype=np.int64)
    cdef Py_ssize_t ia = 0, il = 0, ial = 0

    for i in range(n):
        node = o[i]
        k = kind[node]
        w = wcost[roots[i]]
        if k == PRIM:
            key = a[node]
            pcount[key] += 1
            pbound[key] += w
        elif k == VAR:
            key = a[node]
            if key < depth:
                vcount[key] += 1
                vbound[key] += w
        elif k == APP:
            app_rows[ia] = i
            ia += 1
            bapp += w
        elif k == LAM:
            lam_rows[il] = i
            il += 1
            blam += w
        if fvmin[node] >= depth:
            alpha_rows[ial] = i
            ial += 1
            balpha += w

    out = []
    _bucket(0, o, kind, a, PRIM, pcount, pbound, maxp, out)
    _bucket(1, o, kind, a, VAR, vcount, vbound, maxv, out)
    if napp:
        out.append((2, 0, app_rows, bapp))
    if nlam:
        out.append((3, 0, lam_rows, blam))
    return out, alpha_rows, balpha, (len(free) if free is not None else 0)


cdef void _bucket(int tag, const int64_t[::1] o, const int64_t[::1] kind, const int64_t[::1] a,
                  int64_t want, int64_t[::1] count, int64_t[::1] bound, int64_t maxkey,
                  list out):
    """Counting sort of the rows of one node kind by key, appended in key order."""
    if maxkey < 0:
        return
    cdef Py_ssize_t n = o.shape[0]
    cdef Py_ssize_t i, key
    cdef int64_t node
    cdef Py_ssize_t total = 0
    cdef cnp.ndarray[int64_t, ndim=1] start = np.zeros(maxkey + 2, dtype=np.int64)
    for key in range(maxkey + 1):
        start[key] = total
        total += count[key]
    cdef cnp.ndarray[int64_t, ndim=1] rows = np.empty(total, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] fill = start.copy()
    for i in range(n):
        node = o[i]
        if kind[node] == want:
            key = a[node]
            if want == VAR and count[key] == 0:
                continue
            if key <= maxkey:
                rows[fill[key]] = i
                fill[key] += 1
    for key in range(maxkey + 1):
        if count[key]:
            out.append((tag, key, rows[start[key]:start[key] + count[key]], bound[key]))


def take(list cols, cnp.ndarray rows):
    return [c[rows] for c in cols]


def weighted_sum(const int64_t[::1] wcost, const int64_t[::1] roots):
    cdef Py_ssize_t i
    cdef int64_t total = 0
    for i in range(roots.shape[0]):
        total += wcost[roots[i]]
    return total


def spans_tasks(const int64_t[::1] first_task, multi_task, const int64_t[::1] roots):
    cdef const unsigned char[::1] multi = multi_task.view(np.uint8)
    cdef Py_ssize_t i, n = roots.shape[0]
    if n == 0:
        return False
    cdef int64_t t0 = first_task[roots[0]]
    for i in range(n):
        if multi[roots[i]] or first_task[roots[i]] != t0:
            return True
    return False


def constant_column(const int64_t[::1] col):
    cdef Py_ssize_t i
    cdef int64_t v = col[0]
    for i in range(1, col.shape[0]):
        if col[i] != v:
            return False
    return True


def equal_columns(const int64_t[::1] x, const int64_t[::1] y):
    cdef Py_ssize_t i
    if x.shape[0] != y.shape[0]:
        return False
    for i in range(x.shape[0]):
        if x[i] != y[i]:
            return False
    return True
