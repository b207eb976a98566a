"""Hot numerical kernels with a numba fast path and a pure-numpy fallback.

Two inner loops dominate solver runtime: the accelerated projected-gradient
solve of the TV prox dual, called once per outer BPG iteration, and the
golden-section line search inside the Gaussian-width estimator, called once
per Monte-Carlo sample. Both are compiled with numba when it is importable;
setting the environment variable PRPR_NUMBA=0 selects the pure-numpy twins
instead (same algorithm, same tolerances). The two paths agree to solver
tolerance and are compared by benchmarks/bench_kernels.py.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "backend",
    "tv_prox",
    "tv_prox_numpy",
    "golden_min_dilation",
    "golden_min_dilation_numpy",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _numba_requested() -> bool:
    flag = os.environ.get("PRPR_NUMBA", "").strip().lower()
    if flag in {"0", "off", "false", "no"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_requested()


def backend() -> str:
    """Name of the active kernel backend, for output headers and benchmarks."""
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# TV prox: argmin_u  mu*||diff(u)||_1 + 0.5*||u - p||^2
#
# Solved on the dual: max_{ |v|_inf <= mu }  <v, diff(p)> - 0.5*||diff^T v||^2
# by FISTA with fixed step 1/4 (the squared spectral norm of the 1-D
# difference operator is at most 4). Primal recovery u = p - diff^T v; the
# duality gap mu*||diff(u)||_1 - <v, diff(u)> is exact and nonnegative.
# ---------------------------------------------------------------------------

def tv_prox_numpy(p, mu, gap_tol=1e-8, max_iter=2000):
    """Pure-numpy TV prox. Returns (u, gap, iters, converged)."""
    p = np.asarray(p, dtype=float)
    n = p.size
    if n <= 1 or mu == 0.0:
        return p.copy(), 0.0, 0, True
    v = np.zeros(n - 1)
    w = v.copy()
    tau = 1.0
    u = p.copy()
    gap = 0.0
    for k in range(1, max_iter + 1):
        u = p.copy()
        u[:-1] += w
        u[1:] -= w          # u = p - diff^T w
        du = np.diff(u)
        v_new = np.clip(w + 0.25 * du, -mu, mu)
        tau_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tau * tau))
        w = v_new + ((tau - 1.0) / tau_new) * (v_new - v)
        v, tau = v_new, tau_new
        # gap test at the feasible point v
        u = p.copy()
        u[:-1] += v
        u[1:] -= v
        du = np.diff(u)
        tvu = float(np.sum(np.abs(du)))
        gap = mu * tvu - float(v @ du)
        primal = mu * tvu + 0.5 * float(np.sum((u - p) ** 2))
        if gap <= gap_tol * (1.0 + abs(primal)):
            return u, gap, k, True
    return u, gap, max_iter, False


def golden_min_dilation_numpy(zt_sq, zte, e_sq, comp, t_max, tol=1e-8):
    """Golden-section minimum of the squared distance to the t-dilation set.

    f(t) = zt_sq - 2*t*zte + t^2*e_sq + sum_j max(comp[j] - t, 0)^2
    is convex in t >= 0; comp holds the magnitudes of the complement part
    (absolute entries for l1, block norms for l1-l2). Returns (t, f(t)).
    """
    comp = np.asarray(comp, dtype=float)

    def f(t):
        r = comp - t
        r[r < 0.0] = 0.0
        return zt_sq - 2.0 * t * zte + t * t * e_sq + float(np.sum(r * r))

    a, b = 0.0, float(t_max)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


if NUMBA_ENABLED:
    from numba import njit

    @njit(cache=True)
    def _tv_prox_jit(p, mu, gap_tol, max_iter):
        n = p.shape[0]
        u = p.copy()
        if n <= 1 or mu == 0.0:
            return u, 0.0, 0, True
        v = np.zeros(n - 1)
        v_new = np.zeros(n - 1)
        w = np.zeros(n - 1)
        tau = 1.0
        gap = 0.0
        for k in range(1, max_iter + 1):
            # u = p - diff^T w, then dual ascent step on diff(u)
            for j in range(n):
                u[j] = p[j]
            for j in range(n - 1):
                u[j] += w[j]
                u[j + 1] -= w[j]
            for j in range(n - 1):
                val = w[j] + 0.25 * (u[j + 1] - u[j])
                if val > mu:
                    val = mu
                elif val < -mu:
                    val = -mu
                v_new[j] = val
            tau_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tau * tau))
            coef = (tau - 1.0) / tau_new
            for j in range(n - 1):
                w[j] = v_new[j] + coef * (v_new[j] - v[j])
                v[j] = v_new[j]
            tau = tau_new
            # gap at the feasible point v
            for j in range(n):
                u[j] = p[j]
            for j in range(n - 1):
                u[j] += v[j]
                u[j + 1] -= v[j]
            tvu = 0.0
            vdu = 0.0
            for j in range(n - 1):
                du = u[j + 1] - u[j]
                tvu += abs(du)
                vdu += v[j] * du
            gap = mu * tvu - vdu
            sq = 0.0
            for j in range(n):
                r = u[j] - p[j]
                sq += r * r
            primal = mu * tvu + 0.5 * sq
            if gap <= gap_tol * (1.0 + abs(primal)):
                return u, gap, k, True
        return u, gap, max_iter, False

    @njit(cache=True)
    def _golden_jit(zt_sq, zte, e_sq, comp, t_max, tol):
        a = 0.0
        b = t_max
        g = _GOLDEN
        c = b - g * (b - a)
        d = a + g * (b - a)

        def f(t):
            acc = zt_sq - 2.0 * t * zte + t * t * e_sq
            for j in range(comp.shape[0]):
                r = comp[j] - t
                if r > 0.0:
                    acc += r * r
            return acc

        fc = f(c)
        fd = f(d)
        while b - a > tol:
            if fc < fd:
                b = d
                d = c
                fd = fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a = c
                c = d
                fc = fd
                d = a + g * (b - a)
                fd = f(d)
        t = 0.5 * (a + b)
        return t, f(t)

    def tv_prox(p, mu, gap_tol=1e-8, max_iter=2000):
        p = np.ascontiguousarray(p, dtype=float)
        return _tv_prox_jit(p, float(mu), float(gap_tol), int(max_iter))

    def golden_min_dilation(zt_sq, zte, e_sq, comp, t_max, tol=1e-8):
        comp = np.ascontiguousarray(comp, dtype=float)
        return _golden_jit(float(zt_sq), float(zte), float(e_sq), comp,
                           float(t_max), float(tol))
else:
    tv_prox = tv_prox_numpy
    golden_min_dilation = golden_min_dilation_numpy
