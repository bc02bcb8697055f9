"""Vectorized reference kernels for hole expansion.

These operate on int64 numpy columns describing a partial abstraction's
match table.  `_kernels.pyx` provides drop-in compiled equivalents.
"""

from __future__ import annotations

import numpy as np

LAM, APP, VAR, PRIM = 0, 1, 2, 4
TAG_PRIM, TAG_VAR, TAG_APP, TAG_LAM = 0, 1, 2, 3

IMPLEMENTATION = "python"


def _groups(tag: int, idx: np.ndarray, keys: np.ndarray, w: np.ndarray) -> list:
    if idx.size == 0:
        return []
    order = np.argsort(keys, kind="stable")
    idx = idx[order]
    keys = keys[order]
    w = w[order]
    cuts = np.flatnonzero(keys[1:] != keys[:-1]) + 1
    starts = np.concatenate(([0], cuts))
    bounds = np.add.reduceat(w, starts)
    return [(tag, int(keys[s]), chunk, int(b))
            for s, chunk, b in zip(starts, np.split(idx, cuts), bounds)]


def split_hole(o, roots, depth, kind, a, fvmin, wcost):
    """Partition match rows by the shape of the subtree under the hole.

    Returns (groups, alpha_rows, alpha_bound, n_free).  Each group is
    (tag, key, rows, bound) where bound sums weighted root costs over the
    rows.  alpha_rows are the rows whose subtree may bind an abstraction
    variable at this lambda depth; n_free counts distinct variables that
    would be free in the abstraction and so are never proposed.
    """
    kinds = kind[o]
    av = a[o]
    w = wcost[roots]
    pm = np.flatnonzero(kinds == PRIM)
    out = _groups(TAG_PRIM, pm, av[pm], w[pm])
    vm = np.flatnonzero(kinds == VAR)
    n_free = 0
    if vm.size:
        vkeys = av[vm]
        bound = vkeys < depth
        n_free = int(np.unique(vkeys[~bound]).size)
        vm = vm[bound]
        out += _groups(TAG_VAR, vm, vkeys[bound], w[vm])
    for tag, k in ((TAG_APP, APP), (TAG_LAM, LAM)):
        rows = np.flatnonzero(kinds == k)
        if rows.size:
            out.append((tag, 0, rows, int(w[rows].sum())))
    alpha = np.flatnonzero(fvmin[o] >= depth)
    return out, alpha, int(w[alpha].sum()), n_free


def take(cols: list, rows: np.ndarray) -> list:
    return [c[rows] for c in cols]


def weighted_sum(wcost: np.ndarray, roots: np.ndarray) -> int:
    return int(wcost[roots].sum())


def spans_tasks(first_task: np.ndarray, multi_task: np.ndarray, roots: np.ndarray) -> bool:
    if roots.size == 0:
        return False
    if multi_task[roots].any():
        return True
    ft = first_task[roots]
    return bool(ft.min() != ft.max())


def constant_column(col: np.ndarray) -> bool:
    return bool((col == col[0]).all())


def equal_columns(x: np.ndarray, y: np.ndarray) -> bool:
    return bool(np.array_equal(x, y))
