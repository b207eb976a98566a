"""Timing comparison of the two hot kernels: selected backend vs plain numpy.

Run from the repo root:

    python3 benchmarks/bench_kernels.py            # compiled backend (if available)
    PRPR_NUMBA=0 python3 benchmarks/bench_kernels.py   # force the numpy path

With the compiled backend active this reports its speedup over the numpy
reference; with PRPR_NUMBA=0 both columns time the same numpy code and the
ratio is ~1, which doubles as a sanity check of the flag.
"""

import time

import numpy as np

from prpr import kernels
from prpr.rng import seeded_rng


def _time(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_tv(n=128, calls=2000, reps=3):
    # solver-shaped workload: the BPG loop calls the prox once per iteration
    # on short vectors, so per-call overhead is what matters
    rng = seeded_rng(7)
    ps = [rng.standard_normal(n) * 2.0 for _ in range(calls)]
    mu = 0.3

    def run(fn):
        for p in ps:
            fn(p, mu, 1e-8, 2000)

    kernels.tv_prox(ps[0], mu, 1e-8, 2000)  # trigger compilation outside timing
    t_sel = _time(lambda: run(kernels.tv_prox), reps)
    t_np = _time(lambda: run(kernels.tv_prox_numpy), reps)
    u_sel, *_ = kernels.tv_prox(ps[0], mu, 1e-8, 2000)
    u_np, *_ = kernels.tv_prox_numpy(ps[0], mu, 1e-8, 2000)
    agree = float(np.max(np.abs(u_sel - u_np)))
    return t_sel, t_np, agree


def bench_dilation(n=512, calls=2000, reps=3):
    rng = seeded_rng(8)
    cases = []
    for _ in range(calls):
        z = rng.standard_normal(n)
        e = np.sign(rng.standard_normal(8))
        comp = np.abs(rng.standard_normal(n - 8))
        cases.append((float(z[:8] @ z[:8]), float(z[:8] @ e), 8.0, comp,
                      10.0 * float(np.linalg.norm(z))))

    def run(fn):
        for zt_sq, zte, e_sq, comp, t_max in cases:
            fn(zt_sq, zte, e_sq, comp, t_max, 1e-8)

    c = cases[0]
    kernels.golden_min_dilation(*c, 1e-8)
    t_sel = _time(lambda: run(kernels.golden_min_dilation), reps)
    t_np = _time(lambda: run(kernels.golden_min_dilation_numpy), reps)
    v_sel = kernels.golden_min_dilation(*c, 1e-8)[1]
    v_np = kernels.golden_min_dilation_numpy(*c, 1e-8)[1]
    return t_sel, t_np, abs(v_sel - v_np)


def main():
    name = kernels.backend()
    print(f"selected backend: {name}")
    t_sel, t_np, agree = bench_tv()
    print(f"tv_prox          {name} {t_sel * 1e3:8.1f} ms   numpy {t_np * 1e3:8.1f} ms   "
          f"speedup {t_np / t_sel:5.1f}x   max|diff| {agree:.2e}")
    t_sel, t_np, agree = bench_dilation()
    print(f"golden_dilation  {name} {t_sel * 1e3:8.1f} ms   numpy {t_np * 1e3:8.1f} ms   "
          f"speedup {t_np / t_sel:5.1f}x   |diff| {agree:.2e}")


if __name__ == "__main__":
    main()
