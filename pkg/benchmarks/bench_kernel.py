"""Compare the compiled sampling kernel with the numpy fallback.

    python benchmarks/bench_kernel.py [--axis 400] [--reps 5] [--n 160] [--repeat 3]

Times raw count draws and a full percentile-table build for each available
backend, and checks that both backends return identical tables.
"""
import argparse
import time

import numpy as np

from errcons.core import GridSpec
from errcons.nullsim import backend, grid_samples, run_simulation


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--axis", type=int, default=400)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--n", type=int, default=160)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    spec = GridSpec(n_trials=args.n, axis_points=args.axis, reps_per_cell=args.reps, seed=1)
    samples = spec.axis_points ** 2 * spec.reps_per_cell
    print(f"grid {spec.axis_points}x{spec.axis_points}x{spec.reps_per_cell}, n={spec.n_trials}, "
          f"{samples:,} samples, workers={args.workers}")
    print(f"{'backend':8s} {'draw [s]':>9s} {'Msamp/s':>8s} {'table [s]':>10s} {'Msamp/s':>8s}")

    tables, draws = {}, {}
    for name in sorted(backend.BACKENDS):
        t_draw, batch = best_of(lambda: grid_samples(spec, backend=name), args.repeat)
        t_table, table = best_of(lambda: run_simulation(spec, backend=name, workers=args.workers), args.repeat)
        tables[name], draws[name] = table, batch
        print(f"{name:8s} {t_draw:9.3f} {samples / t_draw / 1e6:8.1f} {t_table:10.3f} {samples / t_table / 1e6:8.1f}")

    if len(tables) > 1:
        a, b = (draws[k] for k in sorted(draws))
        same = all(np.array_equal(x, y) for x, y in ((a.k_i, b.k_i), (a.k_j, b.k_j), (a.e, b.e)))
        print("draws identical:", same)
        print("tables identical:", all(t == tables["numpy"] for t in tables.values()))
    else:
        print("compiled kernel not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
