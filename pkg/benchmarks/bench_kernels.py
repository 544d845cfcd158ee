"""Compare the compiled and pure-Python kernels.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Times the restricted-growth-string table (partition enumeration) and a full
membership solve (dense simplex) on each backend and prints the speedup.
"""

import argparse
import json
import statistics
import sys
import time

import numpy as np

from invcorr import _backend
from invcorr.partitions import bell_number, clique_point, enumerate_partitions
from invcorr.polytope import CorrMatrix, membership


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times)


def member_matrix(d, seed=0):
    rng = np.random.default_rng(seed)
    parts = enumerate_partitions(d)
    idx = rng.choice(len(parts), size=min(6, len(parts)), replace=False)
    w = rng.dirichlet(np.ones(len(idx)))
    return CorrMatrix(sum(wi * clique_point(parts[i]) for wi, i in zip(w, idx)))


def cases():
    for d in (8, 9, 10):
        n = bell_number(d)
        yield f"rgs_table d={d} ({n} rows)", lambda b, d=d, n=n: _backend.get_kernels(b).rgs_table(d, n)
    for d in (5, 6, 7):
        R = member_matrix(d)
        yield f"membership d={d} (member)", lambda b, R=R: membership(R, backend=b)
    R = CorrMatrix.from_offdiagonal(3, [0.8, 0.5, 0.2])
    yield "membership d=3 (non-member)", lambda b, R=R: membership(R, backend=b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        print("compiled extension not built; only the pure-Python backend is available")
        return 1
    rows = []
    print(f"{'case':36s} {'cython (s)':>11s} {'python (s)':>11s} {'speedup':>8s}")
    for name, fn in cases():
        fast, _ = best_of(lambda: fn("cython"), args.repeat)
        slow, _ = best_of(lambda: fn("python"), args.repeat)
        rows.append({"case": name, "cython": fast, "python": slow, "speedup": slow / fast})
        print(f"{name:36s} {fast:11.4f} {slow:11.4f} {slow / fast:7.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
