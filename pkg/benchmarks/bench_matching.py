"""Time the compiled and pure-Python greedy matching kernels on the same input.

    python benchmarks/bench_matching.py --n 14000 --repeat 5
"""

import argparse
import time

import numpy as np

from pslab import kernels
from pslab.methods import compute_caliper, match_nearest


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=14000, help="subjects per matching call")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    # skewed PS with ~30% treated, roughly what a 70% subsample of a 20000 cohort looks like
    ps = rng.beta(2, 5, args.n)
    A = (rng.random(args.n) < ps).astype(int)
    cal = compute_caliper(ps, A)

    backends = ["python"] + (["cython"] if kernels.compiled_greedy_match is not None else [])
    results = {}
    for b in backends:
        secs, m = best_of(lambda b=b: match_nearest(ps, A, cal, np.random.default_rng(1), backend=b), args.repeat)
        results[b] = (secs, m)
        print(f"{b:>7}: {secs * 1e3:9.2f} ms  ({len(m)} pairs from {int(A.sum())} treated)")

    if "cython" in results:
        same = np.array_equal(results["python"][1].pairs, results["cython"][1].pairs)
        print(f"speedup: {results['python'][0] / results['cython'][0]:.1f}x, identical pairs: {same}")
    else:
        print("compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
