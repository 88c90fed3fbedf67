"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each case runs both backends on identical inputs, checks the outputs are
bit-identical, and prints wall time per backend and the speed-up.
"""

import argparse
import time

import numpy as np

from mvempirical import kernels
from mvempirical.measures import WeightFamily
from mvempirical.model import cubic, mean_field_ou
from mvempirical.sde import SimConfig, simulate_particles, simulate_self_interacting


def _ou_self(backend, steps):
    cfg = SimConfig(dt=1.0, t_max=float(steps), seed=1, stepper="ou_exact")
    return simulate_self_interacting(mean_field_ou(), WeightFamily.discrete_delayed(1.0), [0.0], cfg,
                                     backend=backend).states


def _ou_euler_lebesgue(backend, steps):
    cfg = SimConfig(dt=0.01, t_max=steps * 0.01, seed=2)
    return simulate_self_interacting(mean_field_ou(), WeightFamily.lebesgue(), [0.0], cfg,
                                     backend=backend).states


def _cubic_particles(backend, steps):
    cfg = SimConfig(dt=0.01, t_max=steps * 0.01, seed=3, store_stride=10)
    paths = simulate_particles(cubic(), 20, WeightFamily.lebesgue(), "instantaneous_law",
                               np.zeros((20, 1)), cfg, backend=backend)
    return np.concatenate([p.states for p in paths])


def _w2_merge(backend, n):
    g = np.random.default_rng(4)
    impl = kernels.backends()[backend]
    xa, xb = np.sort(g.standard_normal(n)), np.sort(g.standard_normal(n // 3))
    wa, wb = np.full(n, 1.0 / n), np.full(n // 3, 1.0 / (n // 3))
    return np.array([impl.w2_sorted_cost(xa, wa, xb, wb)])


CASES = [
    ("ou exact, self-interacting, 1e5 steps", _ou_self, 100_000),
    ("ou euler, lebesgue weights, 1e5 steps", _ou_euler_lebesgue, 100_000),
    ("cubic, 20 particles, 2e4 steps", _cubic_particles, 20_000),
    ("w2 quantile merge, 3e5 atoms", _w2_merge, 300_000),
]


def _best(fn, backend, size, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(backend, size)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    have = kernels.backends()
    if "compiled" not in have:
        print("compiled extension not built; only the python backend is available")
        return
    print(f"{'case':42s} {'compiled s':>11s} {'python s':>10s} {'speed-up':>9s}  identical")
    for name, fn, size in CASES:
        tc, oc = _best(fn, "compiled", size, args.repeat)
        tp, op = _best(fn, "python", size, 1)
        same = np.array_equal(oc, op)
        print(f"{name:42s} {tc:11.4f} {tp:10.3f} {tp / tc:8.1f}x  {same}")


if __name__ == "__main__":
    main()
