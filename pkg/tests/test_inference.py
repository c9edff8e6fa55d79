import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subbag.data import ArrayDataset
from subbag.errors import ConfigError, NumericalError
from subbag.inference import (infer, normal_cdf, normal_quantile, standard_errors,
                              variance_estimator, wald_intervals)
from subbag.losses import Family
from subbag.subsample import SubbaggingPlan, SubsampleSummary, run_plan


def summary(beta, k=100, sid=0):
    beta = np.asarray(beta, dtype=float)
    return SubsampleSummary(k=k, beta_tilde=beta, hessian=np.eye(len(beta)), loss_at_opt=0.0,
                            subsample_id=sid, seed=sid)


def test_identical_summaries_give_zero_variance():
    psi = variance_estimator([summary([1.0, 2.0], sid=s) for s in range(5)], [0, 1])
    assert np.array_equal(psi, np.zeros((2, 2)))


def test_two_point_variance():
    # (k/2) * 2 * ((a - b)/2)^2
    a, b, k = 1.3, -0.4, 80
    psi = variance_estimator([summary([a], k=k), summary([b], k=k, sid=1)], [0])
    assert psi[0, 0] == pytest.approx(k * (a - b) ** 2 / 4, rel=1e-14)


def test_active_set_restriction_and_symmetry():
    rng = np.random.default_rng(0)
    summaries = [summary(rng.normal(size=5), sid=s) for s in range(10)]
    full = variance_estimator(summaries, range(5))
    sub = variance_estimator(summaries, [1, 3])
    assert np.allclose(sub, full[np.ix_([1, 3], [1, 3])], rtol=1e-14)
    assert np.array_equal(full, full.T)
    assert np.min(np.linalg.eigvalsh(full)) >= -1e-12


def test_order_invariance():
    rng = np.random.default_rng(1)
    summaries = [summary(rng.normal(size=3), sid=s) for s in range(12)]
    a = variance_estimator(summaries, [0, 1, 2])
    b = variance_estimator(summaries[::-1], [0, 1, 2])
    assert np.allclose(a, b, rtol=1e-13, atol=1e-15)


def test_variance_needs_two_subsamples():
    with pytest.raises(ConfigError):
        variance_estimator([summary([1.0])], [0])


def test_standard_error_values():
    assert standard_errors(np.array([[4.0]]), N=10_000, k=100, m=100)[0] == pytest.approx(0.028284271, abs=1e-9)
    with pytest.raises(NumericalError):
        standard_errors(np.array([[-1.0]]), 100, 10, 10)


def test_inflation_factor():
    s = [summary([0.0], k=1000, sid=i) for i in range(50)]
    s[0] = summary([1.0], k=1000)
    assert infer(s, [0.0], [0], N=100_000).inflation == 3.0
    s2 = [summary([0.0], k=5000, sid=i) for i in range(20)]
    s2[0] = summary([1.0], k=5000)
    assert infer(s2, [0.0], [0], N=100_000).inflation == 2.0


def test_wald_examples():
    low, high, p, deg = wald_intervals([0.0], [1.0])
    assert p[0] == 1.0 and deg == ()
    assert low[0] == pytest.approx(-1.959964, abs=1e-6) and high[0] == pytest.approx(1.959964, abs=1e-6)
    _, _, p, _ = wald_intervals([1.959964], [1.0])
    assert p[0] == pytest.approx(0.05, abs=1e-6)
    low, high, _, _ = wald_intervals([3.0], [0.0278])
    assert (round(low[0], 4), round(high[0], 4)) == (2.9455, 3.0545)


def test_wald_degenerate_se():
    low, high, p, deg = wald_intervals([2.0, 0.0, 1.0], [0.0, 0.0, 0.5])
    assert deg == (0, 1)
    assert p[0] == 0.0 and p[1] == 1.0
    assert low[0] == high[0] == 2.0


def test_wald_fixed_multiplier():
    low, high, _, _ = wald_intervals([1.0], [0.5], z=1.96)
    assert low[0] == 1.0 - 0.98 and high[0] == 1.0 + 0.98
    with pytest.raises(ConfigError):
        wald_intervals([1.0], [1.0], level=1.0)


def test_normal_quantile_against_scipy():
    stats = pytest.importorskip("scipy.stats")
    for u in np.concatenate([np.linspace(1e-10, 1e-3, 50), np.linspace(0.001, 0.999, 500),
                             1 - np.linspace(1e-10, 1e-3, 50)]):
        assert normal_quantile(u) == pytest.approx(stats.norm.ppf(u), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(1e-12, 1 - 1e-12))
def test_quantile_inverts_cdf(u):
    assert normal_cdf(normal_quantile(u)) == pytest.approx(u, rel=1e-10, abs=1e-15)


def test_normal_quantile_domain():
    with pytest.raises(ValueError):
        normal_quantile(0.0)
    assert normal_quantile(0.5) == 0.0


@pytest.mark.slow
def test_variance_formula_matches_monte_carlo():
    # linear model, fresh data each replication; m = 50 so the plug-in is accurate
    beta0 = np.array([1.0, -0.5, 0.0])
    N, k, m, reps = 4000, 400, 50, 1000
    estimates, predicted, psi_diag = [], [], []
    for r in range(reps):
        rng = np.random.default_rng(10_000 + r)
        X = rng.standard_normal((N, 3))
        data = ArrayDataset(X, X @ beta0 + rng.standard_normal(N))
        summaries = run_plan(data, SubbaggingPlan(N=N, k=k, m=m, master_seed=r), Family.LINEAR)
        bbar = np.mean([s.beta_tilde for s in summaries], axis=0)
        estimates.append(bbar)
        se = standard_errors(variance_estimator(summaries, range(3)), N, k, m)
        predicted.append(se ** 2)
        psi_diag.append(np.diag(variance_estimator(summaries, range(3))))
    empirical = np.var(np.array(estimates), axis=0, ddof=1)
    mean_pred = np.mean(predicted, axis=0)
    assert np.all(np.abs(mean_pred / empirical - 1) <= 0.15)
    # unit noise and standard normal design: the sandwich V^-1 Sigma V^-1 is the identity
    assert np.all(np.abs(np.mean(psi_diag, axis=0) - 1) <= 0.15)


def test_report_fields():
    rng = np.random.default_rng(3)
    summaries = [summary(rng.normal(size=4), k=200, sid=s) for s in range(8)]
    est = np.array([1.0, 0.0, -2.0, 0.5])
    rep = infer(summaries, est, [0, 2], N=5000)
    assert rep.active_set == (0, 2)
    assert np.array_equal(rep.estimate, [1.0, -2.0])
    assert rep.psi_hat.shape == (2, 2)
    assert np.all(rep.ci_low < rep.estimate) and np.all(rep.estimate < rep.ci_high)
    assert rep.inflation == pytest.approx(1 + 5000 / 1600)
    assert math.isclose(rep.ci_high[0] - rep.estimate[0], normal_quantile(0.975) * rep.se[0])
