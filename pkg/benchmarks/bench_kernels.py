"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--proposals 30] [--S 10] [--repeat 5]

Each kernel is run once untimed so numba compilation is excluded, then the
best of ``--repeat`` runs is reported. The last column is the largest
absolute difference between the two paths' outputs; the single-call kernels
agree to rounding, while the 256-step descent drifts by up to ~1e-6 because
Adam normalizes away the size of tiny gradient differences near kinks.
"""
import argparse
import time

import numpy as np

from trajsampler import kernels
from trajsampler.optimizer import OptimizerConfig, learning_rates


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(P, S, T, rng):
    points = rng.normal(0.0, 5.0, size=(P, T, 2)).cumsum(axis=1)
    weights = rng.random(P)
    weights /= weights.sum()
    init = points[rng.choice(P, size=S, replace=S > P)] + rng.normal(0.0, 0.01, size=(S, T, 2))
    lrs, resets = learning_rates(OptimizerConfig())
    X = points.reshape(P, -1)
    seeds = X[rng.choice(P, size=S, replace=False)]
    return {
        "distance_matrix": lambda be: kernels.distance_matrix(points, init, False, backend=be),
        "risk_and_grad": lambda be: kernels.risk_and_grad(points, weights, init, S, False, backend=be),
        "adam_descent_256": lambda be: kernels.adam_descent(
            points, weights, init, S, False, lrs, resets, 0.9, 0.999, 1e-8, backend=be),
        "lloyd": lambda be: kernels.lloyd(X, seeds, 100, backend=be),
    }


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--proposals", type=int, default=30)
    ap.add_argument("--S", type=int, default=10)
    ap.add_argument("--T", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if kernels.NUMBA is None:
        raise SystemExit("numba is not installed; only the numpy path is available")
    rng = np.random.default_rng(args.seed)
    print(f"P={args.proposals} S={args.S} T={args.T} repeat={args.repeat}")
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(args.proposals, args.S, args.T, rng).items():
        diff = max_diff(fn(kernels.NUMPY), fn(kernels.NUMBA))
        t_np = best_of(lambda: fn(kernels.NUMPY), args.repeat)
        t_nb = best_of(lambda: fn(kernels.NUMBA), args.repeat)
        print(f"{name:<18}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
