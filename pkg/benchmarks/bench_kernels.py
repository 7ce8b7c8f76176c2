"""Compare the numba and pure-numpy kernel paths.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Part one times each kernel in-process (both variants are importable regardless
of the env flag). Part two times a full default run in fresh interpreters with
SILOSIM_DISABLE_NUMBA unset and set, so the dispatch used by the engine is
what gets measured.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from silosim import _kernels as K

ENGINE_SNIPPET = """
import time
from silosim.core import SystemConfig
from silosim.engine import run_system
from silosim import _kernels
run_system(SystemConfig(T=2))
t0 = time.perf_counter()
for seed in range({runs}):
    run_system(SystemConfig(seed=seed))
print(_kernels.BACKEND, (time.perf_counter() - t0) / {runs})
"""


def bench(fn, args, repeat):
    fn(*args)  # warm up / compile
    return min(timeit.repeat(lambda: fn(*args), number=20, repeat=repeat)) / 20


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 8))
    D = K.pairwise_distances_np(X)
    labels = rng.integers(0, 8, size=10).astype(np.int64)
    emb = rng.normal(size=(10, 8))
    cases = {
        "pairwise_distances": ("pairwise_distances", (X,)),
        "knn (k=15)": ("knn", (D, 15)),
        "majority_centroid": ("majority_centroid", (labels, emb, 8)),
        "nearest_item": ("nearest_item", (emb, X[0])),
    }
    print(f"{'kernel':<22}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, (base, args) in cases.items():
        t_np = bench(getattr(K, base + "_np"), args, repeat)
        if K.HAS_NUMBA:
            t_nb = bench(getattr(K, base + "_nb"), args, repeat)
            print(f"{name:<22}{t_np * 1e6:>12.2f}{t_nb * 1e6:>12.2f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<22}{t_np * 1e6:>12.2f}{'n/a':>12}{'':>10}")


def engine_table(runs):
    print(f"\nfull run (n=30, T=80), mean of {runs}")
    for flag in ("", "1"):
        env = dict(os.environ, SILOSIM_DISABLE_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", ENGINE_SNIPPET.format(runs=runs)],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.split()
        print(f"  {out[0]:<8}{float(out[1]) * 1e3:>10.1f} ms/run")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--runs", type=int, default=5)
    args = ap.parse_args()
    kernel_table(args.repeat)
    engine_table(args.runs)


if __name__ == "__main__":
    main()
