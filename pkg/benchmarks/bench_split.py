"""Benchmark the compiled tree-growing kernel against the numpy fallback.

Grows the same bootstrap forest through both implementations, checks the
trees are identical node for node, then reports trees per second and the
speedup. The two backends are loaded directly so one process can time both;
normal code goes through synthaudit.kernels, which picks one at import.

    python benchmarks/bench_split.py --rows 400 --features 8 --trees 100
"""

import argparse
import math
import time

import numpy as np

from synthaudit.kernels import _split_np

try:
    from synthaudit.kernels import _split_fast
except ImportError:
    _split_fast = None


def grow_forest(impl, X, y, n_classes, mtry, seeds, boot_idx):
    trees = []
    for seed, idx in zip(seeds, boot_idx):
        trees.append(impl.build_tree(X[idx], y[idx], n_classes, mtry, 1, seed))
    return trees


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=400)
    ap.add_argument("--features", type=int, default=8)
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    X = rng.random((args.rows, args.features))
    y = rng.integers(0, args.classes, args.rows)
    mtry = max(1, int(math.isqrt(args.features)))
    seeds = [int(s) for s in rng.integers(0, 2**63, args.trees)]
    boot_idx = [rng.integers(0, args.rows, args.rows) for _ in range(args.trees)]

    ref = grow_forest(_split_np, X, y, args.classes, mtry, seeds, boot_idx)

    if _split_fast is None:
        print("compiled kernel not built; only the numpy fallback is available")
    else:
        fast = grow_forest(_split_fast, X, y, args.classes, mtry, seeds, boot_idx)
        for t_ref, t_fast in zip(ref, fast):
            for a, b in zip(t_ref, t_fast):
                assert np.array_equal(a, b), "backends disagree"
        print(f"backends agree on all {args.trees} trees "
              f"({args.rows} rows x {args.features} features)")

    results = {}
    impls = [("numpy", _split_np)] + ([("compiled", _split_fast)] if _split_fast else [])
    for name, impl in impls:
        best = math.inf
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            grow_forest(impl, X, y, args.classes, mtry, seeds, boot_idx)
            best = min(best, time.perf_counter() - t0)
        results[name] = best
        print(f"{name:9s} {best:8.3f} s  ({args.trees / best:8.1f} trees/s)")

    if "compiled" in results:
        print(f"speedup   {results['numpy'] / results['compiled']:8.1f}x")


if __name__ == "__main__":
    main()
