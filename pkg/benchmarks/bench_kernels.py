"""Compare the numba and numpy versions of the batched conjugate kernel.

    python3 benchmarks/bench_kernels.py [--runs 3] [--json out.json]
"""
import argparse
import json
import time

import numpy as np

from toriclab import _kernels


def _time(fn, args, runs):
    fn(*args)  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(runs):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    # (samples, functions, dual points): a hat transform, a check transform, a 2-D primal
    shapes = [(129, 1001, 1024), (1024, 1001, 512), (1089, 1089, 1089)]
    results = []
    for ns, m, ny in shapes:
        s = np.sort(rng.uniform(-1, 1, ns))
        F = rng.standard_normal((ns, m))
        F[rng.random((ns, m)) < 0.1] = np.inf
        y = np.linspace(-2, 2, ny)
        row = {"shape": [ns, m, ny], "numpy_s": _time(_kernels.conjugate_numpy, (s, F, y), args.runs)}
        if _kernels.HAVE_NUMBA:
            row["numba_s"] = _time(_kernels.conjugate_numba, (s, F, y), args.runs)
            row["speedup"] = row["numpy_s"] / row["numba_s"]
            same = np.array_equal(_kernels.conjugate_numpy(s, F, y), _kernels.conjugate_numba(s, F, y))
            row["identical"] = bool(same)
        results.append(row)
        print("  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
