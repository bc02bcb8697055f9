"""Compare the compiled and numpy hole-expansion kernels.

Micro: replays every split_hole call of one search through both kernels.
End to end: runs iterated compression once per kernel in a subprocess
(the kernel is chosen at import) and checks the libraries agree.

    python benchmarks/bench_kernels.py [--programs 250] [--iterations 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from abstract_forge import _kernels_py
from abstract_forge.search import SearchConfig, Searcher
from abstract_forge.synth import SynthConfig, generate_corpus

try:
    from abstract_forge import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

_CHILD = """
import json, sys, time
from abstract_forge.compression import compress_iterated
from abstract_forge.kernels import IMPLEMENTATION
from abstract_forge.search import SearchConfig
from abstract_forge.synth import SynthConfig, generate_corpus
programs, iterations = int(sys.argv[1]), int(sys.argv[2])
corpus = generate_corpus(SynthConfig(programs=programs))
t = time.perf_counter()
res = compress_iterated(corpus, iterations, SearchConfig())
print(json.dumps({"impl": IMPLEMENTATION, "seconds": time.perf_counter() - t,
                  "ratio": float(res.ratio), "bodies": [a.body for a in res.abstractions]}))
"""


def record_calls(programs: int, limit: int = 3000) -> tuple:
    corpus = generate_corpus(SynthConfig(programs=programs))
    searcher = Searcher(corpus, SearchConfig())
    calls = []
    real = _kernels_py.split_hole

    def spy(*args):
        if len(calls) < limit:
            calls.append(args)
        return real(*args)

    import abstract_forge.search as search_mod
    saved = search_mod.K.split_hole
    search_mod.K.split_hole = spy
    try:
        searcher.run()
    finally:
        search_mod.K.split_hole = saved
    return calls


def time_kernel(fn, calls, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        for args in calls:
            fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def same_output(calls) -> bool:
    for args in calls:
        g1, a1, b1, f1 = _kernels_py.split_hole(*args)
        g2, a2, b2, f2 = _kernels_c.split_hole(*args)
        if (b1, f1) != (b2, f2) or not np.array_equal(a1, a2) or len(g1) != len(g2):
            return False
        for x, y in zip(g1, g2):
            if x[:2] != y[:2] or x[3] != y[3] or not np.array_equal(x[2], y[2]):
                return False
    return True


def end_to_end(impl: str, programs: int, iterations: int) -> dict:
    env = dict(os.environ, ABSTRACT_FORGE_KERNELS=impl)
    out = subprocess.run([sys.executable, "-c", _CHILD, str(programs), str(iterations)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--programs", type=int, default=250)
    ap.add_argument("--iterations", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_c is None:
        sys.exit("compiled kernels not built; run `pip install -e . --no-build-isolation`")

    calls = record_calls(args.programs)
    rows = sum(len(c[0]) for c in calls)
    tp = time_kernel(_kernels_py.split_hole, calls, args.repeat)
    tc = time_kernel(_kernels_c.split_hole, calls, args.repeat)
    print(f"split_hole: {len(calls)} calls, {rows} rows")
    print(f"  numpy   {tp * 1e3:9.2f} ms")
    print(f"  cython  {tc * 1e3:9.2f} ms   speedup {tp / tc:.2f}x   identical={same_output(calls)}")

    py = end_to_end("python", args.programs, args.iterations)
    cy = end_to_end("cython", args.programs, args.iterations)
    print(f"compress {args.programs} programs x {args.iterations} iterations:")
    print(f"  numpy   {py['seconds']:7.2f} s  ratio {py['ratio']:.4f}")
    print(f"  cython  {cy['seconds']:7.2f} s  ratio {cy['ratio']:.4f}   "
          f"speedup {py['seconds'] / cy['seconds']:.2f}x")
    print(f"  same library: {py['bodies'] == cy['bodies']}")


if __name__ == "__main__":
    main()
