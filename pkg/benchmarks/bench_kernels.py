"""Timing harness for the mode-sum kernels.

Compares the numba path against the pure-numpy fallback on grids shaped
like the ones the time optimizer actually sweeps (n_modes = chain length,
n_times = window / grid step). Run:

    python3 benchmarks/bench_kernels.py --repeats 5
"""

import argparse
import time

import numpy as np

from spinrelay import kernels

CASES = [
    # (n_modes, n_times)  -- first-iteration grids scale with N
    (25, 5_000),
    (50, 10_000),
    (100, 20_000),
    (200, 40_000),
    # later-iteration window: short grid, called once per iteration
    (100, 1_000),
]


def _workload(n_modes, n_times, seed):
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    freqs = np.cos(np.pi * (2 * np.arange(n_modes) + 1) / (2 * n_modes + 1))
    times = 0.01 * np.arange(1, n_times + 1)
    return weights, -2.0 * freqs, times


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(repeats):
    if not kernels.USE_NUMBA:
        print("note: numba path unavailable or disabled; timing numpy only")
    header = f"{'modes':>6} {'times':>7} {'numpy':>10} {'numba':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n_modes, n_times in CASES:
        weights, freqs, times = _workload(n_modes, n_times, seed=n_modes)
        # warm the JIT cache before timing
        kernels.probability_series(weights, freqs, times[:8])
        t_np = _best_of(
            lambda: kernels.probability_series(
                weights, freqs, times, force_numpy=True
            ),
            repeats,
        )
        if kernels.USE_NUMBA:
            t_nb = _best_of(
                lambda: kernels.probability_series(weights, freqs, times),
                repeats,
            )
            a = kernels.probability_series(weights, freqs, times)
            b = kernels.probability_series(
                weights, freqs, times, force_numpy=True
            )
            scale = max(1.0, float(np.max(np.abs(b))))
            assert np.max(np.abs(a - b)) < 1e-12 * scale
            print(
                f"{n_modes:>6} {n_times:>7} {t_np * 1e3:>8.2f}ms "
                f"{t_nb * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x"
            )
        else:
            print(f"{n_modes:>6} {n_times:>7} {t_np * 1e3:>8.2f}ms {'-':>10} {'-':>8}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="take the best of this many runs")
    args = parser.parse_args()
    run(args.repeats)


if __name__ == "__main__":
    main()
