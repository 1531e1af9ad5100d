"""Time the numba kernels against their numpy counterparts.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once untimed (numba compiles on the first call), then the
best of ``--repeat`` runs is reported for both backends together with the
largest absolute difference between their outputs.
"""

import argparse
import time

import numpy as np

from dirichlet_ops import _accel


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n = np.arange(1, 65)
    logs = np.log(n.astype(float))
    cs = rng.normal(size=n.size) + 1j * rng.normal(size=n.size)
    z = rng.uniform(0, 2, 200_000) + 1j * rng.uniform(-50, 50, 200_000)
    yield "dirichlet_eval (64 terms, 2e5 points)", lambda b: getattr(_accel, f"dirichlet_eval_{b}")(logs, cs, z)
    yield ("dirichlet_eval_deriv (64 terms, 2e5 points)",
           lambda b: getattr(_accel, f"dirichlet_eval_deriv_{b}")(logs, cs, z)[1])

    primes = [2, 3, 5, 7, 11, 13, 17, 19]
    idx = np.arange(2, 21)
    exps = np.array([[_multiplicity(k, p) for p in primes] for k in idx], dtype=float)
    amps = (rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)) * np.log(idx)
    m = 100_000
    angles = rng.uniform(0, 2 * np.pi, size=(m, len(primes)))
    sigma, t = rng.exponential(size=m), rng.uniform(size=m)
    yield ("character_derivative_sq (19 terms, 1e5 samples)",
           lambda b: getattr(_accel, f"character_derivative_sq_{b}")(amps, np.log(idx), exps, angles, sigma, t))


def _multiplicity(n, p):
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<50} {'numpy s':>10} {'numba s':>10} {'speedup':>8} {'max diff':>10}")
    for name, run in cases(rng):
        t_np = best_of(lambda: run("numpy"), args.repeat)
        t_nb = best_of(lambda: run("numba"), args.repeat)
        diff = float(np.max(np.abs(np.asarray(run("numpy")) - np.asarray(run("numba")))))
        print(f"{name:<50} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
