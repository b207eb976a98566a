import itertools
import math

import numpy as np
import pytest
import scipy.linalg

from prpr import gauges, measurement, theory
from prpr.gauges import UnsupportedGaugeError
from prpr.rng import child_seed, seeded_rng


def _sparse_truth(n, s, seed, tag=71):
    rng = seeded_rng(seed, tag)
    x = np.zeros(n)
    supp = rng.choice(n, size=s, replace=False)
    x[supp] = rng.choice([-1.0, 1.0], size=s) * rng.uniform(0.5, 1.5, size=s)
    return x


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def test_certificate_identity_map_closed_form():
    # A = Id: B = diag(x), so q restricted to T is sign(x)/|x| = 1/x entrywise
    # on the support, w = e on T and 0 off it, and the certificate is exact.
    n = 6
    x = np.array([1.5, 0.0, -0.5, 0.0, 2.0, 0.0])
    g = gauges.lasso(n)
    desc = gauges.model_descriptor(g, x)
    rep = theory.min_norm_certificate(np.eye(n), x, desc)
    assert rep.ri_pass and rep.ndsc_pass
    q_expected = np.zeros(n)
    q_expected[desc.t_indices] = 1.0 / np.abs(x[desc.t_indices])
    assert np.allclose(rep.q, q_expected, atol=1e-8)
    assert np.allclose(rep.w[desc.t_indices], desc.e_vector[desc.t_indices], atol=1e-8)
    off = np.delete(rep.w, desc.t_indices)
    assert np.allclose(off, 0.0, atol=1e-8)
    assert rep.sigma_ws <= 1e-8
    assert rep.interp_residual <= 1e-8
    assert np.allclose(rep.eta, desc.e_vector, atol=1e-8)


def test_certificate_interpolates_on_random_instances():
    for i in range(20):
        x = _sparse_truth(12, 3, i)
        a = measurement.sample_gaussian_map(12, 40, child_seed(i, 72))
        desc = gauges.model_descriptor(gauges.lasso(12), x)
        rep = theory.min_norm_certificate(a, x, desc)
        assert rep.ri_pass
        # w restricted to T equals the sign vector by construction
        assert rep.interp_residual <= 1e-8
        assert np.allclose(rep.w[desc.t_indices], desc.e_vector[desc.t_indices], atol=1e-8)


def test_certificate_q_is_min_norm_least_squares():
    x = _sparse_truth(32, 3, 0)
    a = measurement.sample_gaussian_map(32, 200, child_seed(0, 72))
    desc = gauges.model_descriptor(gauges.lasso(32), x)
    rep = theory.min_norm_certificate(a, x, desc)
    b_t = (a @ x)[:, None] * a[:, desc.t_indices]
    q_ref, *_ = scipy.linalg.lstsq(b_t.T, desc.e_vector[desc.t_indices])
    assert np.linalg.norm(rep.q - q_ref) <= 1e-12 * max(1.0, np.linalg.norm(q_ref))


def test_certificate_frozen_instance():
    x = _sparse_truth(32, 3, 0)
    a = measurement.sample_gaussian_map(32, 200, child_seed(0, 72))
    desc = gauges.model_descriptor(gauges.lasso(32), x)
    rep = theory.min_norm_certificate(a, x, desc)
    assert rep.sigma_ws == pytest.approx(0.44847312890144103, rel=1e-10)
    assert rep.q_norm == pytest.approx(8.697802659170799, rel=1e-10)
    assert rep.interp_residual <= 1e-12
    assert rep.ndsc_pass and rep.ri_pass
    assert rep.m == 200 and rep.n == 32


def test_certificate_rank_deficient_reports_failure():
    # two identical columns on the support make B_T singular
    n, m = 6, 20
    a = seeded_rng(3).standard_normal((m, n)) / np.sqrt(m)
    a[:, 1] = a[:, 0]
    x = np.zeros(n)
    x[0] = 1.0
    x[1] = 1.0
    desc = gauges.model_descriptor(gauges.lasso(n), x)
    rep = theory.min_norm_certificate(a, x, desc)
    assert not rep.ri_pass
    assert not rep.ndsc_pass
    assert math.isnan(rep.sigma_ws)
    assert np.isnan(rep.q).all()


def test_certificate_rejects_point_off_subspace():
    desc = gauges.ModelDescriptor("lasso", 4, np.array([0]), np.array([1.0, 0, 0, 0]), 1)
    with pytest.raises(ValueError):
        theory.min_norm_certificate(np.eye(4), np.ones(4), desc)


def test_certificate_rejects_tv():
    x = np.ones(8)
    desc = gauges.model_descriptor(gauges.tv_1d(8), x)
    with pytest.raises(UnsupportedGaugeError):
        theory.min_norm_certificate(np.eye(8), x, desc)


def test_restricted_injectivity():
    # hand case: B = diag(Ax) A with A = Id, x = (2, 3) -> B_T^T B_T = diag(4, 9)
    x = np.array([2.0, 3.0])
    lin = theory.linearized_map(np.eye(2), x, gauges.model_descriptor(gauges.lasso(2), x))
    assert theory.restricted_injectivity(lin) == pytest.approx(4.0)
    assert theory.restricted_injectivity(np.eye(3), np.empty(0, dtype=int)) == np.inf


def test_kv_report_text():
    x = _sparse_truth(8, 2, 1)
    a = measurement.sample_gaussian_map(8, 30, child_seed(1, 72))
    desc = gauges.model_descriptor(gauges.lasso(8), x)
    rep = theory.min_norm_certificate(a, x, desc)
    text = rep.to_kv_text()
    assert "sigma_ws=" in text and "ndsc_pass=" in text
    d = rep.kv_dict()
    assert d["m"] == 30 and d["t_dim"] == 2


# ---------------------------------------------------------------------------
# descent-cone geometry
# ---------------------------------------------------------------------------

def test_smin_inner_min_matches_enumeration():
    for i in range(20):
        rng = seeded_rng(14, i)
        m = int(rng.integers(3, 8))
        a = rng.standard_normal((m, 4))
        z = rng.standard_normal(4)
        k = -(-m // 2)
        best = min(
            float(np.linalg.norm(a[list(rows)] @ z))
            for rows in itertools.combinations(range(m), k))
        assert abs(theory.smin_inner_min(a, z) - best) <= 1e-12 * (1.0 + best)


def test_descent_directions_are_feasible_units():
    x = _sparse_truth(16, 3, 2)
    g = gauges.lasso(16)
    desc = gauges.model_descriptor(g, x)
    zs = theory.sample_descent_directions(g, desc, x, 50, seed=7)
    r0 = gauges.gauge_value(g, x)
    tau = 1e-6 * np.linalg.norm(x)
    for z in zs:
        assert np.linalg.norm(z) == pytest.approx(1.0, abs=1e-12)
        assert gauges.gauge_value(g, x + tau * z) <= r0 + 1e-15


def test_descent_directions_group_variant():
    g = gauges.group_lasso(12, 3)
    rng = seeded_rng(21)
    x = np.zeros(12)
    x[0:3] = rng.standard_normal(3)
    desc = gauges.model_descriptor(g, x)
    zs = theory.sample_descent_directions(g, desc, x, 20, seed=3)
    r0 = gauges.gauge_value(g, x)
    tau = 1e-6 * np.linalg.norm(x)
    assert all(gauges.gauge_value(g, x + tau * z) <= r0 + 1e-15 for z in zs)


def test_descent_directions_reject_tv():
    x = np.ones(8)
    g = gauges.tv_1d(8)
    desc = gauges.model_descriptor(g, x)
    with pytest.raises(UnsupportedGaugeError):
        theory.sample_descent_directions(g, desc, x, 5, seed=0)


def test_smin_mc_monotone_in_samples_and_deterministic():
    x = _sparse_truth(10, 2, 4)
    g = gauges.lasso(10)
    desc = gauges.model_descriptor(g, x)
    a = measurement.sample_gaussian_map(10, 30, child_seed(4, 72))
    v1 = theory.smin_mc(a, g, desc, x, 20, seed=11)
    v2 = theory.smin_mc(a, g, desc, x, 60, seed=11)
    assert v2 <= v1  # same stream: more samples only lower the running min
    assert theory.smin_mc(a, g, desc, x, 20, seed=11) == v1
    with pytest.raises(ValueError):
        theory.smin_mc(a, g, desc, x, 0, seed=11)


def test_gaussian_width_full_support_closed_form():
    # T = R^n: the cap distance reduces to min_t ||z - t e||, solved by
    # t* = max(0, <z, e>/||e||^2)
    n = 6
    x = seeded_rng(17).uniform(0.5, 1.5, n) * seeded_rng(18).choice([-1, 1], n)
    g = gauges.lasso(n)
    desc = gauges.model_descriptor(g, x)
    est, err = theory.gaussian_width_mc(g, desc, n, 400, seed=5)
    rng = seeded_rng(5, 9)
    e = desc.e_vector
    acc = np.empty(400)
    for i in range(400):
        z = rng.standard_normal(n)
        t = max(0.0, float(z @ e) / float(e @ e))
        acc[i] = float(np.sum((z - t * e) ** 2))
    assert est == pytest.approx(math.sqrt(np.mean(acc)), abs=1e-6)
    assert err >= 0.0


def test_width_upper_bound_frozen_values():
    assert theory.width_upper_bound("lasso", {"n": 64, "s": 2}) == pytest.approx(
        32.00063483882185, rel=1e-12)
    assert theory.width_upper_bound("lasso", {"n": 64, "s": 4}) == pytest.approx(
        63.64746503050461, rel=1e-12)
    assert theory.width_upper_bound("lasso", {"n": 64, "s": 8}) == pytest.approx(
        125.8036453527455, rel=1e-12)
    assert theory.width_upper_bound("group_lasso", {"L": 8, "B": 8, "s": 1}) == pytest.approx(
        31.05149097154629, rel=1e-12)
    assert theory.width_upper_bound("group_lasso", {"L": 8, "B": 8, "s": 2}) == pytest.approx(
        60.58409706164582, rel=1e-12)
    assert theory.width_upper_bound(
        "tv_1d", {"n": 128, "s": 12, "delta": 0.8, "C": 1.0}) == pytest.approx(
        353.132965229878, rel=1e-12)


def test_width_upper_bound_edges():
    assert theory.width_upper_bound("lasso", {"n": 16, "s": 0}) == 0.0
    assert theory.width_upper_bound("lasso", {"n": 16, "s": 16}) == 16.0
    assert theory.width_upper_bound("group_lasso", {"L": 4, "B": 3, "s": 4}) == 12.0
    alias = theory.width_upper_bound("analysis_group_lasso", {"L": 8, "B": 8, "s": 1})
    assert alias == theory.width_upper_bound("group_lasso", {"L": 8, "B": 8, "s": 1})
    with pytest.raises(ValueError):
        theory.width_upper_bound("lasso", {"n": 8, "s": 9})
    with pytest.raises(ValueError):
        theory.width_upper_bound("tv_1d", {"n": 128, "s": 12, "delta": 0.5, "C": 1.0})
    with pytest.raises(UnsupportedGaugeError):
        theory.width_upper_bound("nuclear", {})


def test_nu_gauss_value():
    assert theory.NU_GAUSS == pytest.approx(0.06962856318419446, rel=1e-15)
    assert theory.NU_GAUSS == pytest.approx(math.sqrt(math.pi / 2) / 18, rel=1e-15)


def test_sample_bound_frozen_and_monotone():
    rep = theory.sample_bound("lasso", {"n": 64, "s": 2}, t=1.0)
    pref = rep.required_m / rep.width_bound_sq
    assert pref == pytest.approx(23326256.934841312, rel=1e-6)
    assert rep.required_m == 746455031
    assert rep.formula.startswith("m >= 64(1+t)")
    m4 = theory.sample_bound("lasso", {"n": 64, "s": 4}, t=1.0).required_m
    assert m4 > rep.required_m
    t2 = theory.sample_bound("lasso", {"n": 64, "s": 2}, t=2.0).required_m
    assert t2 > rep.required_m
    with pytest.raises(ValueError):
        theory.sample_bound("lasso", {"n": 64, "s": 2}, t=0.0)


# ---------------------------------------------------------------------------
# rate constants
# ---------------------------------------------------------------------------

def _rate_instance():
    x = _sparse_truth(32, 3, 0)
    a = measurement.sample_gaussian_map(32, 200, child_seed(0, 72))
    desc = gauges.model_descriptor(gauges.lasso(32), x)
    return a, x, theory.min_norm_certificate(a, x, desc)


def test_rate_constant_frozen_values():
    a, x, rep = _rate_instance()
    rc = theory.rate_constant_lasso(a, x, rep, c=3.0, kappa=0.5, vrho=0.5,
                                    delta=1.0, t=1.0)
    assert rc.formula_prefactor == pytest.approx(5625.859466925447, rel=1e-10)
    assert rc.empirical_prefactor == pytest.approx(1092.73292104837, rel=1e-10)
    assert rc.a == pytest.approx(92.85084660356995, rel=1e-10)
    assert rc.b == pytest.approx(546.366460524185, rel=1e-10)
    assert rc.sigma_max == pytest.approx(4.927993303617605e-06, rel=1e-10)
    assert rc.empirical_prefactor == pytest.approx(2.0 * rc.b, rel=1e-14)
    assert rc.sigma_max == pytest.approx(1.0 / (4.0 * rc.a * rc.b), rel=1e-14)


def test_rate_constant_validation():
    a, x, rep = _rate_instance()
    with pytest.raises(ValueError):
        theory.rate_constant_lasso(a, x, rep, c=3.0, kappa=1.0, vrho=0.5, delta=1.0, t=1.0)
    bad = gauges.ModelDescriptor("lasso", 4, np.array([0]), np.array([1.0, 0, 0, 0]), 1)
    degenerate = theory.CertificateReport(
        np.zeros(4), np.zeros(4), np.zeros(4), 1.5, 1.0, 0.0, 0.0, False, True,
        np.array([0]), 0.0, 4, 4)
    with pytest.raises(ValueError):
        theory.rate_constant_lasso(np.eye(4), np.eye(4)[0], degenerate,
                                   c=3.0, kappa=0.5, vrho=0.5, delta=1.0, t=1.0)


# ---------------------------------------------------------------------------
# concentration
# ---------------------------------------------------------------------------

def test_concentration_inj_log_variant():
    frac_small = theory.concentration_check(
        "inj", {"n": 8, "m": 2, "delta": 1.0, "variant": "log"}, trials=100, seed=0)
    frac_large = theory.concentration_check(
        "inj", {"n": 8, "m": 256, "delta": 1.0, "variant": "log"}, trials=100, seed=0)
    assert frac_small == pytest.approx(0.84)
    assert frac_large == pytest.approx(1.0)
    assert frac_large >= theory.CONC_INJ_FLOOR


def test_concentration_inj_fixed_variant_fails_at_scale():
    # the row-max exceeds (1+delta)/sqrt(m) almost surely once m is large;
    # the check reports that honestly rather than forcing a pass
    frac = theory.concentration_check(
        "inj", {"n": 8, "m": 256, "delta": 1.0, "variant": "fixed"}, trials=100, seed=0)
    assert frac == 0.0


def test_concentration_hess():
    lo = theory.concentration_check(
        "hess", {"d": 4, "m": 16, "rho": 0.5}, trials=100, seed=0)
    hi = theory.concentration_check(
        "hess", {"d": 4, "m": 4096, "rho": 0.5}, trials=100, seed=0)
    assert lo == 0.0
    assert hi == pytest.approx(1.0)
    assert hi >= theory.CONC_HESS_FLOOR


def test_concentration_validation():
    with pytest.raises(ValueError):
        theory.concentration_check("inj", {"n": 4, "m": 8, "delta": 1.0,
                                           "variant": "exact"}, trials=5, seed=0)
    with pytest.raises(ValueError):
        theory.concentration_check("spectral", {}, trials=5, seed=0)
    with pytest.raises(ValueError):
        theory.concentration_check("hess", {"d": 2, "m": 4, "rho": 0.5}, trials=0, seed=0)


# ---------------------------------------------------------------------------
# enumeration oracle
# ---------------------------------------------------------------------------

def test_oracle_identity_instance():
    a = np.eye(3)
    x = np.array([1.3, 0.0, 0.0])
    sols = theory.oracle_exact_solve(a, (a @ x) ** 2, gauges.lasso(3))
    assert len(sols) == 2
    key = sorted(sols, key=lambda v: v[0])
    assert np.allclose(key[0], -x, atol=1e-8)
    assert np.allclose(key[1], x, atol=1e-8)


def test_oracle_finds_planted_signal():
    rng = seeded_rng(25)
    a = rng.standard_normal((10, 4)) / np.sqrt(10)
    x = np.array([0.0, 1.2, 0.0, -0.7])
    sols = theory.oracle_exact_solve(a, (a @ x) ** 2, gauges.lasso(4))
    d = min(measurement.dist_to_signclass(s, x) for s in sols)
    assert d <= 1e-6
    # mirror symmetry: solutions come in +- pairs
    for s in sols:
        assert any(np.allclose(s, -t, atol=1e-8) for t in sols)


def test_oracle_guards():
    with pytest.raises(ValueError):
        theory.oracle_exact_solve(np.ones((17, 2)), np.ones(17), gauges.lasso(2))
    with pytest.raises(UnsupportedGaugeError):
        theory.oracle_exact_solve(np.eye(4), np.ones(4), gauges.group_lasso(4, 2))
    with pytest.raises(ValueError):
        theory.oracle_exact_solve(np.eye(2), np.array([1.0, -0.5]), gauges.lasso(2))
