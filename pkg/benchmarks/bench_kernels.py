"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--n 64] [--repeat 5]

Each kernel runs once before timing so compilation is excluded; both
variants are checked to agree before their times are reported.
"""

import argparse
import time

import numpy as np

from balayage import kernels
from balayage.markov_core import random_substochastic
from balayage.nonlinearity import Nonlinearity


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, rng):
    P = random_substochastic(rng, n, max_radius=0.9).P.copy()
    A = np.eye(n) - P
    h = rng.uniform(0.5, 2.0, n)
    b = A @ h
    nu = np.ones(n)
    packed = Nonlinearity.power(np.full(n, 2.0), 1.5).packed()
    u0 = np.zeros(n)
    target = rng.uniform(0.0, 1.0, n) * (rng.random(n) < 0.5)
    cum = np.concatenate([np.cumsum(P, axis=1), np.ones((n, 1))], axis=1)
    states = rng.integers(0, n, 200_000)
    uniforms = rng.random(states.size)
    yield ("gauss_seidel", kernels.gauss_seidel_nb, kernels.gauss_seidel_py,
           (A, b, nu, u0, packed, 1e-12, 10_000, 1e-15), lambda r: r[0])
    yield ("reduced_sweep", kernels.reduced_sweep_nb, kernels.reduced_sweep_py,
           (P, target, 1e-13, 1_000_000), lambda r: r[0])
    yield ("mc_step", kernels.mc_step_nb, kernels.mc_step_py,
           (states, uniforms, cum), lambda r: r)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<15}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, nb, py, call_args, key in cases(args.n, rng):
        t_nb, r_nb = best_of(lambda: nb(*call_args), args.repeat)
        t_py, r_py = best_of(lambda: py(*call_args), max(1, args.repeat // 2))
        if not np.allclose(key(r_nb), key(r_py), rtol=1e-9, atol=1e-12):
            raise SystemExit(f"{name}: numba and numpy results differ")
        print(f"{name:<15}{1e3 * t_nb:>12.3f}{1e3 * t_py:>12.3f}{t_py / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
