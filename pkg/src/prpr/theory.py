"""Numerical checks of the recovery conditions behind regularized phase retrieval.

Everything here evaluates, at desk scale, quantities the analysis reasons
about: descent-cone injectivity (s_min), minimal-norm dual certificates and
the nondegeneracy condition sigma_C(w_S) < 1, restricted injectivity of the
linearized map on the model subspace, Gaussian widths of descent cones with
their closed-form upper bounds, the resulting sample-complexity formulas,
error-rate constants, and the two concentration inequalities the Gaussian
arguments rest on. Monte-Carlo estimates are labeled as such: s_min is an
upper estimate (an infimum sampled from inside the cone), width estimates
come with standard errors, and pass fractions are empirical.

Dense linear algebra throughout; problem sizes are a few thousand at most.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from . import gauges, kernels
from .gauges import GaugeSpec, ModelDescriptor, UnsupportedGaugeError
from .rng import seeded_rng

__all__ = [
    "NU_GAUSS",
    "LinearizedMap",
    "CertificateReport",
    "BoundReport",
    "RateConstants",
    "linearized_map",
    "min_norm_certificate",
    "restricted_injectivity",
    "smin_inner_min",
    "smin_mc",
    "gaussian_width_mc",
    "width_upper_bound",
    "sample_bound",
    "rate_constant_lasso",
    "concentration_check",
    "oracle_exact_solve",
    "CONC_INJ_FLOOR",
    "CONC_HESS_FLOOR",
]

# the absolute constant from the small-ball argument for |<a, z>| over half rows
NU_GAUSS = math.sqrt(math.pi / 2.0) / 18.0

# Frozen floors for the empirical pass fractions at the LARGEST m of the
# default concentration grids (100 seeded trials each). The row-max bound
# holds essentially always from m = 16 on; the spectral deviation needs
# m in the thousands before it concentrates below rho = 1/2.
CONC_INJ_FLOOR = 0.95
CONC_HESS_FLOOR = 0.90


def _kv_text(d: dict) -> str:
    return "\n".join(f"{k}={v}" for k, v in d.items())


@dataclass(frozen=True)
class LinearizedMap:
    """B = diag(A x) A, the Jacobian of v -> |Av|^2 / 2 at x (times 2)."""

    b_matrix: np.ndarray
    t_indices: np.ndarray

    @property
    def restricted(self) -> np.ndarray:
        return self.b_matrix[:, self.t_indices]


@dataclass(frozen=True)
class CertificateReport:
    eta: np.ndarray
    q: np.ndarray
    w: np.ndarray
    sigma_ws: float
    lambda_min_t: float
    eta_norm: float
    q_norm: float
    ndsc_pass: bool
    ri_pass: bool
    t_indices: np.ndarray
    interp_residual: float
    m: int
    n: int

    def kv_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "t_dim": int(self.t_indices.size),
            "lambda_min_t": self.lambda_min_t,
            "sigma_ws": self.sigma_ws,
            "eta_norm": self.eta_norm,
            "q_norm": self.q_norm,
            "interp_residual": self.interp_residual,
            "ndsc_pass": self.ndsc_pass,
            "ri_pass": self.ri_pass,
        }

    def to_kv_text(self) -> str:
        return _kv_text(self.kv_dict())


@dataclass(frozen=True)
class BoundReport:
    kind: str
    params: dict
    width_bound_sq: float
    required_m: int
    formula: str
    t: float
    nu: float = NU_GAUSS

    def kv_dict(self) -> dict:
        out = {"kind": self.kind}
        out.update(self.params)
        out.update(width_bound_sq=self.width_bound_sq, required_m=self.required_m,
                   formula=self.formula, t=self.t, nu=self.nu)
        return out

    def to_kv_text(self) -> str:
        return _kv_text(self.kv_dict())


@dataclass(frozen=True)
class RateConstants:
    formula_prefactor: float
    empirical_prefactor: float
    a: float
    b: float
    sigma_max: float


def linearized_map(a_matrix: np.ndarray, x: np.ndarray,
                   desc: ModelDescriptor | None = None) -> LinearizedMap:
    a_matrix = np.asarray(a_matrix, dtype=float)
    x = np.asarray(x, dtype=float)
    if a_matrix.shape[1] != x.size:
        raise ValueError(f"shape mismatch: A {a_matrix.shape}, x {x.shape}")
    t_idx = desc.t_indices if desc is not None else np.empty(0, dtype=int)
    return LinearizedMap((a_matrix @ x)[:, None] * a_matrix, np.asarray(t_idx, dtype=int))


def min_norm_certificate(a_matrix: np.ndarray, x_bar: np.ndarray, desc: ModelDescriptor,
                         ri_tol: float | None = None,
                         ndsc_margin: float = 1e-6) -> CertificateReport:
    """Least-squares dual certificate w = B^T q with q = B_T^{+T} e.

    Requires x_bar in T. A rank-deficient restriction B_T (lambda_min at or
    below ri_tol, default 1e-10 times the mean diagonal of B_T^T B_T) yields
    ri_pass = False with the certificate fields set to NaN instead of raising.
    """
    if desc.kind not in gauges.DECOMPOSABLE:
        raise UnsupportedGaugeError(
            f"certificates need a decomposable model description, not {desc.kind!r}")
    a_matrix = np.asarray(a_matrix, dtype=float)
    x_bar = np.asarray(x_bar, dtype=float)
    m, n = a_matrix.shape
    t_idx = desc.t_indices
    off_t = np.delete(x_bar, t_idx)
    if off_t.size and np.linalg.norm(off_t) > 1e-8 * max(np.linalg.norm(x_bar), 1e-300):
        raise ValueError("reference point has mass outside its model subspace T")

    ax = a_matrix @ x_bar
    b_t = ax[:, None] * a_matrix[:, t_idx]
    gram = b_t.T @ b_t
    d = t_idx.size
    lam_min = float(scipy.linalg.eigvalsh(gram, subset_by_index=[0, 0])[0]) if d else float("inf")
    if ri_tol is None:
        ri_tol = 1e-10 * (float(np.trace(gram)) / d if d else 1.0)
    nan_vec = lambda k: np.full(k, np.nan)
    if d and lam_min <= ri_tol:
        return CertificateReport(nan_vec(m), nan_vec(m), nan_vec(n), float("nan"),
                                 lam_min, float("nan"), float("nan"), False, False,
                                 t_idx, float("nan"), m, n)

    e_t = desc.e_vector[t_idx]
    cho = scipy.linalg.cho_factor(gram)
    u = scipy.linalg.cho_solve(cho, e_t)
    q = b_t @ u
    w = (ax[:, None] * a_matrix).T @ q
    eta = (ax * ax) * (a_matrix[:, t_idx] @ u)
    sigma_ws = gauges._polar_complement(desc, w)
    interp = float(np.linalg.norm(w[t_idx] - e_t))
    return CertificateReport(eta, q, w, sigma_ws, lam_min,
                             float(np.linalg.norm(eta)), float(np.linalg.norm(q)),
                             sigma_ws < 1.0 - ndsc_margin, True, t_idx, interp, m, n)


def restricted_injectivity(lin: LinearizedMap | np.ndarray,
                           t_indices: np.ndarray | None = None) -> float:
    """lambda_min of B_T^T B_T; strictly positive certifies injectivity on T."""
    if isinstance(lin, LinearizedMap):
        b = lin.b_matrix
        t_indices = lin.t_indices if t_indices is None else t_indices
    else:
        b = np.asarray(lin, dtype=float)
    t_indices = np.asarray(t_indices, dtype=int)
    if t_indices.size == 0:
        return float("inf")
    b_t = b[:, t_indices]
    gram = b_t.T @ b_t
    return float(scipy.linalg.eigvalsh(gram, subset_by_index=[0, 0])[0])


# ---------------------------------------------------------------------------
# descent-cone quantities
# ---------------------------------------------------------------------------

def smin_inner_min(a_matrix: np.ndarray, z: np.ndarray) -> float:
    """min over row subsets I with |I| >= m/2 of ||A^I z||, computed exactly.

    The minimum picks exactly ceil(m/2) rows with the smallest |<a_r, z>|.
    """
    sq = np.sort((a_matrix @ z) ** 2)
    k = -(-a_matrix.shape[0] // 2)
    return float(np.sqrt(np.sum(sq[:k])))


def _split_complement(desc: ModelDescriptor, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """zeta_T, zeta_S (full-length, disjoint supports), and the S-gauge of zeta_S."""
    zt = np.zeros_like(zeta)
    zt[desc.t_indices] = zeta[desc.t_indices]
    zs = zeta - zt
    if desc.kind == "lasso":
        denom = float(np.sum(np.abs(zs)))
    else:
        norms = np.linalg.norm(zs.reshape(-1, desc.block_size), axis=1)
        denom = float(np.sum(norms))
    return zt, zs, denom


def sample_descent_directions(g: GaugeSpec, desc: ModelDescriptor, x_bar: np.ndarray,
                              n_samples: int, seed: int) -> np.ndarray:
    """Unit vectors in the descent cone of R at x_bar, by rejection sampling.

    Candidates mix a T-component flipped to point against e with a shrunken
    S-component sized so the first-order change of R is negative; membership
    is then tested exactly via R(x_bar + tau*z) <= R(x_bar). Not a uniform
    law on the cone; estimates built on it are one-sided.
    """
    if g.kind not in gauges.DECOMPOSABLE:
        raise UnsupportedGaugeError(f"descent-cone sampling needs decomposable gauges, not {g.kind!r}")
    rng = seeded_rng(seed, 5)
    r_at_x = gauges.gauge_value(g, x_bar)
    tau = 1e-6 * float(np.linalg.norm(x_bar))
    out = np.empty((n_samples, g.n))
    got = 0
    for _ in range(1000 * max(n_samples, 1)):
        if got == n_samples:
            break
        zeta = rng.standard_normal(g.n)
        beta = rng.uniform()
        zt, zs, denom = _split_complement(desc, zeta)
        h = float(desc.e_vector @ zt)
        if h == 0.0:
            continue
        if h > 0:
            zt = -zt
        else:
            h = -h
        z = zt + (beta * h / denom) * zs if denom > 0 else zt
        z /= np.linalg.norm(z)
        if gauges.gauge_value(g, x_bar + tau * z) <= r_at_x:
            out[got] = z
            got += 1
    if got < n_samples:
        raise RuntimeError(f"descent-cone sampler accepted only {got}/{n_samples} draws")
    return out


def smin_mc(a_matrix: np.ndarray, g: GaugeSpec, desc: ModelDescriptor, x_bar: np.ndarray,
            n_samples: int, seed: int) -> float:
    """Upper Monte-Carlo estimate of s_min (an infimum over the descent cone)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    a_matrix = np.asarray(a_matrix, dtype=float)
    zs = sample_descent_directions(g, desc, np.asarray(x_bar, dtype=float), n_samples, seed)
    return min(smin_inner_min(a_matrix, z) for z in zs)


def gaussian_width_mc(g: GaugeSpec, desc: ModelDescriptor, n: int,
                      n_samples: int, seed: int) -> tuple[float, float]:
    """sqrt(E dist(Z, cone(dR(x)))^2) by Monte Carlo over Z ~ N(0, Id_n).

    The squared distance to the t-dilation of the subdifferential is
    ||Z_T - t e||^2 plus the shrinkage excess on S; the scalar t >= 0 is
    found by golden-section search. Returns (estimate, std_error) with the
    standard error reported for the SQUARED distance mean.
    """
    if g.kind not in gauges.DECOMPOSABLE:
        raise UnsupportedGaugeError(f"width sampling needs decomposable gauges, not {g.kind!r}")
    rng = seeded_rng(seed, 9)
    e_t = desc.e_vector[desc.t_indices]
    e_sq = float(e_t @ e_t)
    vals = np.empty(n_samples)
    for i in range(n_samples):
        z = rng.standard_normal(n)
        zt = z[desc.t_indices]
        if g.kind == "lasso":
            mask = np.ones(n, dtype=bool)
            mask[desc.t_indices] = False
            comp = np.abs(z[mask])
        else:
            norms = np.linalg.norm(z.reshape(-1, desc.block_size), axis=1)
            mask = np.ones(norms.size, dtype=bool)
            mask[desc.active_blocks] = False
            comp = norms[mask]
        t_max = 10.0 * float(np.linalg.norm(z))
        _, vals[i] = kernels.golden_min_dilation(
            float(zt @ zt), float(zt @ e_t), e_sq, comp, t_max, 1e-8)
    mean_sq = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return math.sqrt(max(mean_sq, 0.0)), stderr


def width_upper_bound(kind: str, params: dict) -> float:
    """Closed-form upper bound on the SQUARED width of the descent cone sphere cap.

    lasso:        s((sqrt(2 ln(n-s)) + 1)^2 + 1)
    group_lasso:  s((sqrt(2 ln(L-s)) + sqrt(B))^2 + B)   (same for the
                  analysis variant, with L the number of coefficient blocks)
    tv_1d:        (C/Delta) * s * ln(n)^2, valid only when Delta >= 8s/n
    """
    if kind == "lasso":
        n, s = int(params["n"]), int(params["s"])
        if not 0 <= s <= n:
            raise ValueError(f"need 0 <= s <= n, got s={s}, n={n}")
        if s == 0:
            return 0.0
        if s == n:
            return float(n)
        return s * ((math.sqrt(2.0 * math.log(n - s)) + 1.0) ** 2 + 1.0)
    if kind in ("group_lasso", "analysis_group_lasso"):
        l_blocks, b, s = int(params["L"]), int(params["B"]), int(params["s"])
        if not 0 <= s <= l_blocks:
            raise ValueError(f"need 0 <= s <= L, got s={s}, L={l_blocks}")
        if s == 0:
            return 0.0
        if s == l_blocks:
            return float(s * b)
        return s * ((math.sqrt(2.0 * math.log(l_blocks - s)) + math.sqrt(b)) ** 2 + b)
    if kind == "tv_1d":
        n, s = int(params["n"]), int(params["s"])
        delta, c_const = float(params["delta"]), float(params["C"])
        if delta < 8.0 * s / n:
            raise ValueError(
                f"jump separation {delta} violates the requirement Delta >= 8s/n = {8.0 * s / n}")
        return (c_const / delta) * s * math.log(n) ** 2
    raise UnsupportedGaugeError(kind)


def sample_bound(kind: str, params: dict, t: float) -> BoundReport:
    """required_m = ceil(64(1+t)(nu+2)^2/nu^4 * width bound); honest but huge."""
    if t <= 0:
        raise ValueError(f"probability parameter t must be positive, got {t}")
    wb = width_upper_bound(kind, params)
    pref = 64.0 * (1.0 + t) * (NU_GAUSS + 2.0) ** 2 / NU_GAUSS ** 4
    return BoundReport(kind, dict(params), wb, max(1, math.ceil(pref * wb)),
                       f"m >= 64(1+t)(nu+2)^2/nu^4 * w^2[{kind}]", t)


def rate_constant_lasso(a_matrix: np.ndarray, x_bar: np.ndarray, report: CertificateReport,
                        c: float, kappa: float, vrho: float, delta: float,
                        t: float) -> RateConstants:
    """Error-rate constants for the l1 prior with lam = c*sigma.

    formula_prefactor evaluates the displayed bound
        [ 2 sqrt(m)/((1-vrho)||x||) (2 + c sqrt(sm)/((1-vrho)||x||))
          + (1 + (1+delta)/(1-vrho) (1 + sqrt(2 t ln(n)/m)))/(1-kappa)
            * (2 + (c/2) sqrt(sm)/((1-vrho)||x||))^2/(2c) ],
    i.e. dist <= formula_prefactor * sigma under the stated events.

    empirical_prefactor is 2b with a and b assembled from the measured
    certificate instead of the probabilistic estimates:
        b = ||B_T^+||(2 + c||q||) + alpha (2 + (c/2)||q||)^2/(2c),
        a = ||A||^2/2 (3||B_T^+|| + alpha ||q||),
        alpha = (1 + ||B_T^+|| ||Ax||_inf max_{i in S} ||A_i||)/(1 - sigma_ws),
    valid for sigma <= sigma_max = 1/(4ab), where dist <= 2b*sigma.
    """
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if not report.ndsc_pass:
        raise ValueError("rate constants require a nondegenerate certificate (ndsc_pass)")
    a_matrix = np.asarray(a_matrix, dtype=float)
    x_bar = np.asarray(x_bar, dtype=float)
    m, n = a_matrix.shape
    s = int(report.t_indices.size)
    xn = float(np.linalg.norm(x_bar))

    g1 = 1.0 - vrho
    qb = math.sqrt(s * m) / (g1 * xn)
    col = 1.0 + math.sqrt(2.0 * t * math.log(n) / m)
    alpha_formula = (1.0 + (1.0 + delta) / g1 * col) / (1.0 - kappa)
    formula = (2.0 * math.sqrt(m) / (g1 * xn) * (2.0 + c * qb)
               + alpha_formula * (2.0 + 0.5 * c * qb) ** 2 / (2.0 * c))

    pinv = 1.0 / math.sqrt(report.lambda_min_t)
    mask = np.ones(n, dtype=bool)
    mask[report.t_indices] = False
    max_col = float(np.max(np.linalg.norm(a_matrix[:, mask], axis=0))) if mask.any() else 0.0
    ax_inf = float(np.max(np.abs(a_matrix @ x_bar)))
    alpha = (1.0 + pinv * ax_inf * max_col) / (1.0 - report.sigma_ws)
    b = pinv * (2.0 + c * report.q_norm) + alpha * (2.0 + 0.5 * c * report.q_norm) ** 2 / (2.0 * c)
    a = 0.5 * float(np.linalg.norm(a_matrix, 2)) ** 2 * (3.0 * pinv + alpha * report.q_norm)
    return RateConstants(formula, 2.0 * b, a, b, 1.0 / (4.0 * a * b))


# ---------------------------------------------------------------------------
# concentration Monte Carlo
# ---------------------------------------------------------------------------

def concentration_check(kind: str, params: dict, trials: int, seed: int) -> float:
    """Empirical pass fraction of a concentration inequality over seeded trials.

    kind "inj": ||Ax||_inf against a row-max threshold for unit x. Two
    variants: "log" tests sqrt((1+delta) 2 ln(m)/m), which does hold for the
    maximum over m rows (probability about 1 - m^(-delta)); "fixed" tests
    the per-row scale (1+delta)/sqrt(m), which the maximum over rows
    exceeds with high probability once m is large. "log" is the default.

    kind "hess": spectral deviation
        || m A_T^T diag((A_T x)^2) A_T - (2 x x^T + ||x||^2 Id) || <= rho ||x||^2
    for unit x in R^d, A_T an m-by-d Gaussian map with N(0, 1/m) entries.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    passed = 0
    if kind == "inj":
        n, m = int(params["n"]), int(params["m"])
        delta = float(params["delta"])
        variant = params.get("variant", "log")
        if variant == "log":
            thr = math.sqrt((1.0 + delta) * 2.0 * math.log(m) / m)
        elif variant == "fixed":
            thr = (1.0 + delta) / math.sqrt(m)
        else:
            raise ValueError(f"unknown inj variant {variant!r}")
        for i in range(trials):
            rng = seeded_rng(seed, 21, i)
            a = rng.standard_normal((m, n)) / math.sqrt(m)
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            passed += float(np.max(np.abs(a @ x))) <= thr
        return passed / trials
    if kind == "hess":
        d, m = int(params["d"]), int(params["m"])
        rho = float(params["rho"])
        eye = np.eye(d)
        for i in range(trials):
            rng = seeded_rng(seed, 22, i)
            a = rng.standard_normal((m, d)) / math.sqrt(m)
            x = rng.standard_normal(d)
            x /= np.linalg.norm(x)
            ax = a @ x
            dev = m * (a.T @ ((ax * ax)[:, None] * a)) - (2.0 * np.outer(x, x) + eye)
            passed += float(np.max(np.abs(scipy.linalg.eigvalsh(dev)))) <= rho
        return passed / trials
    raise ValueError(f"unknown concentration kind {kind!r}")


# ---------------------------------------------------------------------------
# tiny-instance exact-recovery oracle
# ---------------------------------------------------------------------------

def oracle_exact_solve(a_matrix: np.ndarray, y_bar: np.ndarray, g: GaugeSpec,
                       size_cap: int = 16) -> list[np.ndarray]:
    """Global minimizers of ||x||_1 subject to (Ax)^2 = y_bar, by enumeration.

    Splits the quadratic constraint into 2^m linear systems A x = eps * sqrt(y)
    over sign patterns eps and solves each l1 problem as a linear program
    (feasible patterns only). Patterns come in +-(mirror) pairs, so only
    those with eps[0] = +1 are solved and negations are added back. Returns
    one representative minimizer per optimal pattern, deduplicated; a flat
    optimal face inside one pattern is reported by a single vertex.
    """
    if g.kind != "lasso":
        raise UnsupportedGaugeError(f"the enumeration oracle handles lasso only, not {g.kind!r}")
    a_matrix = np.asarray(a_matrix, dtype=float)
    y_bar = np.asarray(y_bar, dtype=float)
    m, n = a_matrix.shape
    if m > size_cap:
        raise ValueError(f"m = {m} exceeds the enumeration cap {size_cap}")
    if np.any(y_bar < -1e-12):
        raise ValueError("intensities must be nonnegative")
    b = np.sqrt(np.maximum(y_bar, 0.0))

    cost = np.ones(2 * n)
    a_eq = np.hstack([a_matrix, -a_matrix])
    tight = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}
    found: list[tuple[float, np.ndarray]] = []
    for rest in itertools.product((1.0, -1.0), repeat=m - 1):
        eps = np.array((1.0,) + rest)
        res = linprog(cost, A_eq=a_eq, b_eq=eps * b, bounds=(0, None),
                      method="highs", options=tight)
        if res.status != 0:
            continue
        x = res.x[:n] - res.x[n:]
        found.append((float(np.sum(np.abs(x))), x))
        found.append((float(np.sum(np.abs(x))), -x))
    if not found:
        return []
    best = min(v for v, _ in found)
    winners = [x for v, x in found if v <= best + 1e-6 * max(1.0, best)]
    out: list[np.ndarray] = []
    for x in winners:
        if all(np.linalg.norm(x - y) > 1e-6 * max(1.0, np.linalg.norm(x)) for y in out):
            out.append(x)
    return out
