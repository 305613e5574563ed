"""Time the numba row-loop kernels against the vectorised numpy fallback.

    python benchmarks/bench_kernels.py [--n 20000] [--p 2] [--repeat 20]

Also checks that both backends return the same numbers.
"""

import argparse
import timeit

import numpy as np

from mqrif.kernels import numba_kernels, numpy_kernels


def cases(n, p, seed=0):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n, p))
    theta = np.zeros(p)
    u = np.ones(p) / np.sqrt(p)
    args = (u, 0.2, 1.0, 1.0, 1e-10, False)
    h = np.full(p, 6e-6)
    R = np.ascontiguousarray(Y - theta)
    return {
        "score_matrix": (lambda k: k.score_matrix(R, *args)),
        "irls_weights": (lambda k: k.irls_weights(R, *args)),
        "irls_target": (lambda k: k.irls_target(Y, theta, *args)[0]),
        "score_sum": (lambda k: k.score_sum(Y, theta, *args)[0]),
        "jacobian_sum": (lambda k: k.jacobian_sum(R, *args, h)[0]),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if numba_kernels is None:
        raise SystemExit("numba is unavailable (or MQRIF_BACKEND=numpy is set)")

    print(f"n={args.n} p={args.p} repeat={args.repeat}")
    print(f"{'kernel':<14}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}{'max |diff|':>12}")
    for name, call in cases(args.n, args.p).items():
        call(numba_kernels)  # compile outside the timing
        diff = float(np.max(np.abs(np.asarray(call(numba_kernels)) - np.asarray(call(numpy_kernels)))))
        t_np = min(timeit.repeat(lambda: call(numpy_kernels), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: call(numba_kernels), number=1, repeat=args.repeat))
        print(f"{name:<14}{1e3 * t_np:>10.3f}{1e3 * t_nb:>10.3f}{t_np / t_nb:>9.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
