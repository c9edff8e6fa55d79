import math

import numpy as np
import pytest

from subbag.aggregate import subbagging_loss
from subbag.baseline import adaptive_lasso_full, fit_full, sandwich_variance
from subbag.data import ArrayDataset
from subbag.errors import NonIdentifiableError
from subbag.losses import Family
from subbag.pipeline import analyze
from subbag.solver import sbic, solve_penalized
from subbag.subsample import SubbaggingPlan, fit_subsample, run_plan

BETA0 = np.array([3, 1.5, 2, 0, 0, 0, 0, 0.0])


def logistic_data(n, seed, beta=BETA0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, len(beta)))
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    return ArrayDataset(X, y)


def linear_data(n, seed, beta=BETA0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, len(beta)))
    return ArrayDataset(X, X @ beta + rng.standard_normal(n))


def test_linear_full_fit_is_ols():
    data = linear_data(3000, 1)
    fit = fit_full(data, Family.LINEAR)
    ols = np.linalg.solve(data.X.T @ data.X, data.X.T @ data.y)
    assert np.max(np.abs(fit.beta - ols)) <= 1e-10
    assert fit.N == 3000


def test_full_fit_equals_all_row_subsample():
    data = logistic_data(2000, 2)
    fit = fit_full(data, Family.LOGISTIC)
    s = fit_subsample(data, np.arange(2000), Family.LOGISTIC)
    assert np.array_equal(fit.beta, s.beta_tilde)
    assert np.array_equal(fit.hessian, s.hessian)


def test_streaming_chunks_agree():
    data = logistic_data(5000, 3)
    one = fit_full(data, Family.LOGISTIC)
    many = fit_full(data, Family.LOGISTIC, chunk_rows=333)
    assert np.allclose(one.beta, many.beta, rtol=1e-10, atol=1e-12)
    perm = np.random.default_rng(0).permutation(5000)
    shuffled = fit_full(ArrayDataset(data.X[perm], data.y[perm]), Family.LOGISTIC, chunk_rows=333)
    assert np.allclose(one.beta, shuffled.beta, rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_logistic_consistency_over_seeds():
    fits = np.array([fit_full(logistic_data(10_000, s), Family.LOGISTIC).beta for s in range(50)])
    # the Monte-Carlo average is consistent; single seeds scatter at O(1/sqrt(N))
    assert np.max(np.abs(fits.mean(axis=0) - BETA0)) <= 0.1
    assert np.median(np.max(np.abs(fits - BETA0), axis=1)) <= 0.1


def test_lambda_zero_returns_full_fit():
    data = logistic_data(4000, 4)
    fit = fit_full(data, Family.LOGISTIC)
    agg = fit.quadratic()
    w = 1 / np.abs(fit.beta)
    res = solve_penalized(agg, 0.0, w)
    # the certificate bounds the gradient, so the coefficient error is at most residual / min eigenvalue
    bound = 2 * max(res.kkt_residual, 1e-12) / np.min(np.linalg.eigvalsh(agg.H_bar))
    assert np.max(np.abs(res.beta_hat - fit.beta)) <= bound


def test_bic_at_zero_fit():
    data = linear_data(2000, 5)
    fit = fit_full(data, Family.LINEAR)
    agg = fit.quadratic()
    assert sbic(agg, np.zeros(8), fit.N, fit.N) == pytest.approx(fit.N * agg.c, rel=1e-14)
    assert subbagging_loss(agg, fit.beta) == pytest.approx(0.0, abs=1e-10)


def test_full_adaptive_lasso_selects_truth():
    data = linear_data(100_000, 6)
    path = adaptive_lasso_full(data, Family.LINEAR)
    assert path.best.active_set == (0, 1, 2)
    assert len(path.grid) == 100


def test_linear_sandwich_is_identity_for_unit_noise():
    # gradient -2 x r gives Sigma = 4 E[xx'] and V = 2 E[xx'], so V^-1 Sigma V^-1 = I
    N = 200_000
    data = linear_data(N, 7)
    fit = fit_full(data, Family.LINEAR)
    sw = sandwich_variance(data, Family.LINEAR, fit.beta, [0, 1, 2])
    assert np.all(np.abs(np.diag(sw.psi_n) - 1) <= 0.02)
    assert np.allclose(sw.se, 1 / math.sqrt(N), rtol=0.02)
    assert np.allclose(np.diag(sw.sigma_hat), 4, rtol=0.02)
    assert np.allclose(np.diag(sw.v_hat), 2, rtol=0.02)
    assert sw.restrict == (0, 1, 2) and sw.N == N


def test_sandwich_restriction_and_chunking():
    data = logistic_data(6000, 8)
    fit = fit_full(data, Family.LOGISTIC)
    full = sandwich_variance(data, Family.LOGISTIC, fit.beta, range(8))
    part = sandwich_variance(data, Family.LOGISTIC, fit.beta, [2, 0], chunk_rows=500)
    assert np.allclose(part.psi_n, full.psi_n[np.ix_([2, 0], [2, 0])], rtol=1e-9)
    assert np.array_equal(part.psi_n, part.psi_n.T)
    assert np.min(np.linalg.eigvalsh(full.psi_n)) >= -1e-12


def test_sandwich_singular_hessian():
    data = linear_data(5, 9)  # fewer rows than coefficients
    with pytest.raises(NonIdentifiableError):
        sandwich_variance(data, Family.LINEAR, np.zeros(8), [0, 1])


def test_information_equality_at_truth():
    data = logistic_data(100_000, 10)
    sw = sandwich_variance(data, Family.LOGISTIC, BETA0, range(8))
    scale = np.max(np.abs(np.diag(sw.v_hat)))
    assert np.max(np.abs(sw.sigma_hat - sw.v_hat)) <= 0.05 * scale
    d = np.diag(sw.v_hat)
    assert np.all(np.abs(np.diag(sw.sigma_hat) / d - 1) <= 0.05)


def test_degenerate_plan_matches_full_baseline():
    data = logistic_data(3000, 11)
    [s] = run_plan(data, SubbaggingPlan(N=3000, k=3000, m=1, master_seed=0), Family.LOGISTIC)
    sub = analyze([s], N=3000)
    full = adaptive_lasso_full(data, Family.LOGISTIC)
    assert sub.fit.active_set == full.best.active_set
    assert np.array_equal(sub.fit.beta_hat, full.best.beta_hat)
