"""Wall-clock comparison of the numba kernels and the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--n 400] [--steps 2000]
"""

import argparse
import time

import numpy as np

from gpmelab import CoefficientModel, DtRule, IntegratorConfig, SpatialOperatorConfig, front_setup
from gpmelab import simulate, using_backend
from gpmelab._accel import HAVE_NUMBA


def best_of(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n, steps):
    rows = []
    for m in (1, 3):
        model = CoefficientModel.pme(m)
        setup = front_setup(model, n)
        dt_rule = DtRule(2.0 ** (m + 1))
        t_end = steps * dt_rule.dt(setup.grid.dx)
        for label, op in (("harmonic", SpatialOperatorConfig.harmonic()),
                          ("mhm", SpatialOperatorConfig.mhm())):
            for scheme in ("fe", "rk2", "be"):
                if scheme == "be" and op.mhm_enabled:
                    continue
                cfg = IntegratorConfig(scheme, dt_rule, t_end)
                times = {}
                for name in ("numba", "numpy"):
                    if name == "numba" and not HAVE_NUMBA:
                        continue
                    with using_backend(name):
                        simulate(setup, op, IntegratorConfig(scheme, dt_rule, 2 * dt_rule.dt(setup.grid.dx)))
                        times[name] = best_of(lambda: simulate(setup, op, cfg))
                rows.append((f"m={m} {label:<8} {scheme:<3}", times))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    print(f"N={args.n}, {args.steps} steps per run, best of 3 (numba available: {HAVE_NUMBA})")
    print(f"{'case':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, t in bench(args.n, args.steps):
        nb, npy = t.get("numba"), t.get("numpy")
        speed = f"{npy / nb:9.1f}x" if nb and npy else ""
        print(f"{name:<24}{nb if nb else float('nan'):12.4f}{npy:12.4f}{speed:>10}")


if __name__ == "__main__":
    main()
