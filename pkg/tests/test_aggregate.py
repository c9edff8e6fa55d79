import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subbag.aggregate import (adaptive_weights, combine, merge, subbagging_loss, tree_reduce)
from subbag.errors import ConfigError, DataError
from subbag.solver import solve_penalized
from subbag.subsample import SubsampleSummary


def random_summaries(rng, m, p=3, k=50):
    out = []
    for s in range(m):
        A = rng.normal(size=(p, p))
        H = A @ A.T + 0.1 * np.eye(p)
        H = np.triu(H) + np.triu(H, 1).T
        out.append(SubsampleSummary(k=k, beta_tilde=rng.normal(size=p), hessian=H,
                                    loss_at_opt=float(rng.random()), subsample_id=s, seed=s))
    return out


def direct_loss(summaries, beta):
    return np.mean([(beta - s.beta_tilde) @ s.hessian @ (beta - s.beta_tilde) for s in summaries])


def fields_close(a, b, tol=1e-12):
    assert a.m == b.m and a.k == b.k
    for name in ("H_bar", "b", "beta_bar"):
        assert np.allclose(getattr(a, name), getattr(b, name), rtol=tol, atol=tol)
    assert a.c == pytest.approx(b.c, rel=tol, abs=tol)
    assert a.C_loss == pytest.approx(b.C_loss, rel=tol, abs=tol)


def test_single_summary_vanishes_at_center():
    [s] = random_summaries(np.random.default_rng(0), 1)
    agg = merge([s])
    assert abs(subbagging_loss(agg, s.beta_tilde)) <= 1e-12
    assert subbagging_loss(agg, np.zeros(3)) == agg.c
    assert np.array_equal(agg.beta_bar, s.beta_tilde)


def test_hand_built_two_by_two():
    s1 = SubsampleSummary(10, np.array([1.0, -1.0]), np.array([[2.0, 0.5], [0.5, 1.0]]), 0.3, 0, 0)
    s2 = SubsampleSummary(10, np.array([0.5, 2.0]), np.array([[1.0, -0.2], [-0.2, 3.0]]), 0.1, 1, 1)
    agg = merge([s1, s2])
    rng = np.random.default_rng(1)
    for _ in range(20):
        beta = rng.normal(size=2) * 3
        assert subbagging_loss(agg, beta) == pytest.approx(direct_loss([s1, s2], beta), abs=1e-12)
    assert agg.C_loss == pytest.approx(0.2)


def test_random_instance_matches_direct_sum():
    rng = np.random.default_rng(2)
    summaries = random_summaries(rng, 25, p=5)
    agg = merge(summaries)
    for _ in range(50):
        beta = rng.normal(size=5) * 2
        ref = direct_loss(summaries, beta)
        assert subbagging_loss(agg, beta) == pytest.approx(ref, rel=1e-10)
        assert subbagging_loss(agg, beta) >= -1e-10


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    agg = merge(random_summaries(rng, 7, p=4))
    for _ in range(10):
        beta = rng.normal(size=4)
        fd = np.array([(subbagging_loss(agg, beta + h) - subbagging_loss(agg, beta - h)) / 2e-6
                       for h in 1e-6 * np.eye(4)])
        g = agg.gradient(beta)
        assert np.max(np.abs(fd - g)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_constant_dominates_minimum():
    rng = np.random.default_rng(4)
    agg = merge(random_summaries(rng, 6, p=4))
    assert agg.c >= agg.b @ np.linalg.pinv(agg.H_bar) @ agg.b - 1e-9
    assert np.array_equal(agg.H_bar, agg.H_bar.T)
    assert np.min(np.linalg.eigvalsh(agg.H_bar)) >= 0


def test_associativity_and_partitions():
    rng = np.random.default_rng(5)
    A, B, C = (random_summaries(rng, n, p=3) for n in (3, 5, 2))
    a, b, c = merge(A), merge(B), merge(C)
    fields_close(combine(combine(a, b), c), combine(a, combine(b, c)))
    fields_close(combine(a, b, c), merge(A + B + C))
    fields_close(tree_reduce([a, b, c]), merge(A + B + C))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), cuts=st.lists(st.integers(1, 19), max_size=5))
def test_random_partition_equals_whole(seed, cuts):
    summaries = random_summaries(np.random.default_rng(seed), 20, p=3)
    bounds = [0, *sorted(set(cuts)), 20]
    parts = [merge(summaries[i:j]) for i, j in zip(bounds, bounds[1:])]
    fields_close(tree_reduce(parts), merge(summaries))


def test_merge_errors():
    rng = np.random.default_rng(6)
    with pytest.raises(ConfigError):
        merge([])
    s3 = random_summaries(rng, 1, p=3)
    s2 = random_summaries(rng, 1, p=2)
    with pytest.raises(ConfigError):
        merge(s3 + s2)
    other_k = random_summaries(rng, 1, p=3, k=99)
    with pytest.raises(ConfigError):
        merge(s3 + other_k)
    with pytest.raises(DataError):
        subbagging_loss(merge(s3), np.zeros(2))


def test_adaptive_weights():
    assert np.allclose(adaptive_weights([2.0, -0.5], 1.0), [0.5, 2.0])
    assert np.array_equal(adaptive_weights(np.ones(4), 2.0), np.ones(4))
    w = adaptive_weights([1.0, 0.0, -4.0], 1.0)
    assert np.isinf(w[1]) and w[2] == 0.25
    assert adaptive_weights([5.0, 2.0], 1.0, unpenalized=[0])[0] == 0.0
    with pytest.raises(ConfigError):
        adaptive_weights([1.0], 0.0)


def test_infinite_weight_forces_zero():
    rng = np.random.default_rng(7)
    summaries = random_summaries(rng, 4, p=3)
    agg = merge(summaries)
    w = adaptive_weights([1.0, 0.0, 2.0], 1.0)
    fit = solve_penalized(agg, 1e-3, w)
    assert fit.beta_hat[1] == 0.0
    assert 1 not in fit.active_set
