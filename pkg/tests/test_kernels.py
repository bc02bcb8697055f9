import os
import random

import numpy as np
import pytest

from abstract_forge import _kernels_py, kernels
from abstract_forge.search import SearchConfig, Searcher
from oracles import random_corpus

try:
    from abstract_forge import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

needs_ext = pytest.mark.skipif(_kernels_c is None, reason="compiled kernels not built")


def test_selected_implementation():
    forced = os.environ.get("ABSTRACT_FORGE_KERNELS", "").lower() == "python"
    want = "cython" if _kernels_c is not None and not forced else "python"
    assert kernels.IMPLEMENTATION == want


def _calls(seed):
    c = random_corpus(random.Random(seed))
    sr = Searcher(c, SearchConfig(max_arity=2))
    out = []
    real = _kernels_py.split_hole

    def spy(*args):
        out.append(args)
        return real(*args)

    import abstract_forge.search as search_mod
    saved = search_mod.K.split_hole
    search_mod.K.split_hole = spy
    try:
        sr.run()
    finally:
        search_mod.K.split_hole = saved
    return out


@needs_ext
@pytest.mark.parametrize("seed", range(10))
def test_split_hole_agrees(seed):
    for args in _calls(seed):
        g1, a1, b1, f1 = _kernels_py.split_hole(*args)
        g2, a2, b2, f2 = _kernels_c.split_hole(*args)
        assert (b1, f1) == (b2, f2) and np.array_equal(a1, a2)
        assert [(g[0], g[1], g[3]) for g in g1] == [(g[0], g[1], g[3]) for g in g2]
        assert all(np.array_equal(x[2], y[2]) for x, y in zip(g1, g2))


@needs_ext
def test_small_kernels_agree():
    rng = np.random.default_rng(0)
    w = rng.integers(0, 500, 50).astype(np.int64)
    roots = rng.integers(0, 50, 30).astype(np.int64)
    assert _kernels_c.weighted_sum(w, roots) == _kernels_py.weighted_sum(w, roots)
    ft = rng.integers(0, 3, 50).astype(np.int64)
    multi = np.zeros(50, dtype=bool)
    for r in (roots, roots[:1], np.array([], dtype=np.int64)):
        assert _kernels_c.spans_tasks(ft, multi, r) == _kernels_py.spans_tasks(ft, multi, r)
    col = np.full(7, 3, dtype=np.int64)
    assert _kernels_c.constant_column(col) and _kernels_py.constant_column(col)
    col[4] = 2
    assert not _kernels_c.constant_column(col) and not _kernels_py.constant_column(col)
    assert _kernels_c.equal_columns(col, col.copy()) and not _kernels_c.equal_columns(col, col[:3])


def test_fallback_gives_same_search(monkeypatch):
    import abstract_forge.search as search_mod
    c = random_corpus(random.Random(7))
    a = search_mod.cts_search(c)
    for name in ("split_hole", "take", "weighted_sum", "spans_tasks", "constant_column",
                 "equal_columns"):
        monkeypatch.setattr(search_mod.K, name, getattr(_kernels_py, name))
    b = search_mod.cts_search(c)
    assert (a.body, a.utility, a.stats.nodes_expanded) == (b.body, b.utility, b.stats.nodes_expanded)
