import math

import numpy as np
import pytest

from aftsdar import _kernels
from aftsdar.errors import CalibrationError, InputDataError
from aftsdar.simgen import (
    ScenarioSpec,
    _calibrate,
    calibrate_censoring,
    gen_coefficients,
    gen_design_ar1,
    gen_design_neighbor,
    gen_instance,
    make_rng,
    streams,
)


def test_rng_is_philox_and_streams_independent():
    assert isinstance(make_rng(1).bit_generator, np.random.Philox)
    s = streams(5)
    a = make_rng(s["design"]).random(4)
    b = make_rng(s["noise"]).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, make_rng(streams(5)["design"]).random(4))


# ---------------------------------------------------------------- designs

def test_rho_zero_gives_raw_normals():
    Z = make_rng(3).standard_normal((5, 6))
    np.testing.assert_array_equal(gen_design_neighbor(5, 6, 0.0, 3), Z)
    np.testing.assert_array_equal(gen_design_ar1(5, 6, 0.0, 3), Z)


def test_neighbor_moments():
    rho, n = 0.3, 100_000
    X = gen_design_neighbor(n, 6, rho, 11)
    var = X.var(axis=0)
    # interior columns: z_j + rho (z_{j-1} + z_{j+1})
    assert var[2] == pytest.approx(1 + 2 * rho ** 2, rel=0.02)
    assert var[0] == pytest.approx(1.0, rel=0.02)
    oracle = 2 * rho / (1 + 2 * rho ** 2)   # corr(x_2, x_3): shared terms z_2, z_3
    assert np.corrcoef(X[:, 2], X[:, 3])[0, 1] == pytest.approx(oracle, abs=0.01)


def test_ar1_moments():
    rho = 0.5
    X = gen_design_ar1(10_000, 5, rho, 4)
    assert np.corrcoef(X[:, 0], X[:, 2])[0, 1] == pytest.approx(rho ** 2, abs=0.05)
    np.testing.assert_allclose(X.var(axis=0), 1.0, rtol=0.05)


def test_ar1_covariance_converges():
    rho, p = 0.6, 10
    X = gen_design_ar1(100_000, p, rho, 9)
    idx = np.arange(p)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    S = X.T @ X / X.shape[0]
    assert np.linalg.norm(S - sigma, "fro") < 0.05


def test_ar1_rejects_unit_rho():
    with pytest.raises(InputDataError):
        gen_design_ar1(5, 5, 1.0, 0)


# ---------------------------------------------------------------- coefficients

def test_log_scaled_magnitudes():
    spec = ScenarioSpec(n=500, p=10000, K=20, seed=1)
    m1, m2 = spec.magnitude_range()
    assert m1 == pytest.approx(math.sqrt(2 * math.log(10000) / 500), rel=1e-15)
    assert m1 == pytest.approx(0.1919, abs=1e-4)
    beta, support = gen_coefficients(spec)
    assert support.size == 20 == np.count_nonzero(beta)
    np.testing.assert_array_equal(np.flatnonzero(beta), support)
    assert np.all((beta[support] > m1) & (beta[support] < m2))


def test_ratio_scaled_and_signs():
    spec = ScenarioSpec(n=50, p=200, K=40, coef_kind="RatioScaled", R=3.0, random_sign=True, seed=2)
    beta, support = gen_coefficients(spec)
    mags = np.abs(beta[support])
    assert np.all((mags > 1.0) & (mags < 3.0))
    assert np.any(beta < 0) and np.any(beta > 0)
    assert np.all(gen_coefficients(ScenarioSpec(n=50, p=200, K=40, seed=2))[0] >= 0)


def test_spec_validation():
    for bad in (dict(K=0), dict(K=11), dict(rho=1.0), dict(sigma=-1.0), dict(censor_rate=1.0),
                dict(coef_kind="RatioScaled", R=1.0), dict(sigma=0.0)):
        with pytest.raises(InputDataError):
            ScenarioSpec(**{"n": 20, "p": 10, "K": 2, **bad})


# ---------------------------------------------------------------- censoring

def test_censored_fraction_oracle():
    r = np.random.default_rng(0)
    log_t, log_u = r.normal(size=500), np.log(r.random(500))
    for log_eta in (-1.0, 0.0, 0.7):
        oracle = np.mean(np.exp(log_t) > np.exp(log_eta) * np.exp(log_u))
        assert _kernels.censored_fraction(log_t, log_u, log_eta) == oracle


def test_calibration_hits_target_and_is_monotone():
    spec = ScenarioSpec(n=200, p=50, K=5, seed=3)
    inst = gen_instance(spec)
    X, beta = inst.dataset.X, inst.beta_star
    log_etas = []
    for target in (0.1, 0.3, 0.5, 0.7):
        log_eta, rate = _calibrate(X, beta, 1.0, target, seed=7, draws=50_000)
        assert abs(rate - target) <= 0.01
        log_etas.append(log_eta)
    assert np.all(np.diff(log_etas) < 0)  # more censoring needs a smaller bound
    eta = calibrate_censoring(X, beta, 1.0, 0.3, seed=7)
    assert eta == math.exp(_calibrate(X, beta, 1.0, 0.3, 7, 50_000)[0])


def test_calibration_errors():
    X = np.ones((4, 2))
    with pytest.raises(CalibrationError):
        calibrate_censoring(X, np.ones(2), 1.0, 0.0, seed=0)
    with pytest.raises(CalibrationError):
        calibrate_censoring(X, np.ones(2), 1.0, 1.2, seed=0)


def test_realized_rate_near_target():
    rates = [gen_instance(ScenarioSpec(n=500, p=100, K=10, seed=s)).realized_censor_rate
             for s in range(20)]
    # per-instance sd at n=500 is about sqrt(.3*.7/500) = 0.02
    assert abs(np.mean(rates) - 0.3) < 0.02
    assert max(abs(r - 0.3) for r in rates) < 0.08


# ---------------------------------------------------------------- instances

def test_no_censoring_and_noiseless():
    spec = ScenarioSpec(n=30, p=20, K=3, sigma=0.0, censor_rate=0.0, coef_kind="RatioScaled", seed=4)
    inst = gen_instance(spec)
    assert np.all(inst.dataset.delta == 1)
    assert inst.eta_c == math.inf and inst.realized_censor_rate == 0.0
    np.testing.assert_array_equal(inst.dataset.y, inst.dataset.X @ inst.beta_star)


def test_censoring_rule_on_raw_scale():
    inst = gen_instance(ScenarioSpec(n=300, p=20, K=3, censor_rate=0.5, seed=5))
    ds = inst.dataset
    # C <= eta_c, so no observed log time exceeds log(eta_c)
    assert 0 < ds.delta.sum() < ds.n
    assert np.all(np.isfinite(ds.y))
    assert np.all(ds.y <= inst.log_eta_c)


def test_instances_bit_identical():
    spec = ScenarioSpec(n=40, p=30, K=4, seed=99)
    a, b = gen_instance(spec), gen_instance(spec)
    for field in ("y", "delta", "X"):
        np.testing.assert_array_equal(getattr(a.dataset, field), getattr(b.dataset, field))
    np.testing.assert_array_equal(a.beta_star, b.beta_star)
    assert a.eta_c == b.eta_c
    c = gen_instance(ScenarioSpec(n=40, p=30, K=4, seed=100))
    assert not np.array_equal(a.dataset.X, c.dataset.X)
