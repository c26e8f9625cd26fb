"""Compare the numba-compiled kernels against their pure-numpy twins.

Run:  python benchmarks/bench_kernels.py
Set SAVCAST_NO_NUMBA=1 to confirm the whole package runs on the fallback.
"""

import time

import numpy as np

from savcast import kernels
from savcast.io import load_scenario
from savcast.simulate import build_runtime, forecast, initial_state, \
    solve_year_equilibrium


def best_of(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_queue():
    compiled = kernels.finite_population_wait_hours
    python = kernels.python_impl(compiled)
    args = (4000, 1500.0, 4.0, 2.55)
    compiled(*args)   # warm up jit
    t_c = best_of(lambda: compiled(*args))
    t_p = best_of(lambda: python(*args))
    return "finite_population_wait (N=4000)", t_p, t_c


def bench_split():
    rng = np.random.default_rng(0)
    n = 68
    g = rng.uniform(100, 2000, n)
    uh, us, ur = (rng.normal(0, 2, n) for _ in range(3))
    ok = (rng.uniform(size=n) < 0.7).astype(np.uint8)
    seg = np.array([0.66, 0.0, 0.34, 0.0])
    compiled = kernels.split_od_demand
    python = kernels.python_impl(compiled)
    compiled(g, uh, us, ur, ok, 0.5, seg)
    t_c = best_of(lambda: [compiled(g, uh, us, ur, ok, 0.5, seg)
                           for _ in range(100)])
    t_p = best_of(lambda: [python(g, uh, us, ur, ok, 0.5, seg)
                           for _ in range(100)])
    return "nested logit split (100x, 68 ODs)", t_p, t_c


def bench_forecast():
    runtime = build_runtime(load_scenario())
    policy = np.full(15, 700.0)
    forecast(policy, runtime)   # warm up
    t = best_of(lambda: forecast(policy, runtime), repeat=3)
    return runtime, t


def main():
    print(f"active backend: {kernels.backend_name()}")
    rows = [bench_queue(), bench_split()]
    print(f"{'kernel':40s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, t_p, t_c in rows:
        print(f"{name:40s} {t_p * 1e3:9.3f}ms {t_c * 1e3:9.3f}ms "
              f"{t_p / t_c:7.1f}x")
    runtime, t_fc = bench_forecast()
    print(f"{'15-year forecast (end to end)':40s} {'':>10s} {t_fc * 1e3:9.3f}ms")
    if kernels.NUMBA_ENABLED:
        # the year kernel dominates; time its python twin directly
        state = initial_state(runtime)
        eq = solve_year_equilibrium(state, runtime)
        print(f"(year equilibrium converged in {eq.iterations} iterations; "
              f"rerun with SAVCAST_NO_NUMBA=1 for the full numpy baseline)")


if __name__ == "__main__":
    main()
