"""Covariance structures, mean-shift model and seeded stream behaviour."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hidim_ustat.model import (Diagonal, Identity, MeanShiftModel, RngStream,
                               Spiked, cov_eigenvalues, cov_matvec,
                               cov_trace_sq, sample, score)


def dense(cov, d):
    return np.column_stack([cov_matvec(cov, e) for e in np.eye(d)])


def test_identity_eigenvalues():
    lam = cov_eigenvalues(Identity(4))
    assert np.array_equal(lam, np.ones(4))


def test_diagonal_eigenvalues_sorted_descending():
    lam = cov_eigenvalues(Diagonal((0.5, 3.0, 1.0)))
    assert np.array_equal(lam, np.array([3.0, 1.0, 0.5]))


def test_spiked_eigenvalues():
    # sigma2*I + rho*11^T has one eigenvalue sigma2 + rho*d and d-1 copies of sigma2
    cov = Spiked(sigma2=0.5, rho=0.5, d=6)
    lam = cov_eigenvalues(cov)
    assert lam[0] == pytest.approx(0.5 + 0.5 * 6)
    assert np.allclose(lam[1:], 0.5)


def test_spiked_matvec_matches_dense():
    d = 5
    cov = Spiked(sigma2=2.0, rho=0.3, d=d)
    mat = 2.0 * np.eye(d) + 0.3 * np.ones((d, d))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(size=d)
        assert np.allclose(cov_matvec(cov, x), mat @ x)


@pytest.mark.parametrize("cov,expected", [
    (Identity(7), 7.0),
    (Diagonal((1.0, 2.0, 3.0)), 1 + 4 + 9),
    (Spiked(sigma2=0.5, rho=0.5, d=4), (0.5 + 2.0) ** 2 + 3 * 0.25),
])
def test_trace_of_squared_covariance(cov, expected):
    assert cov_trace_sq(cov) == pytest.approx(expected)


def test_trace_sq_matches_dense_frobenius():
    for cov in (Spiked(sigma2=1.3, rho=0.7, d=6), Diagonal((0.2, 5.0, 1.0))):
        d = cov.d if not isinstance(cov, Diagonal) else len(cov.entries)
        mat = dense(cov, d)
        assert cov_trace_sq(cov) == pytest.approx(np.sum(mat * mat))


def test_null_model_zeroes_the_mean():
    m = MeanShiftModel(d=4, mu=np.array([2.0, 0.0, 0.0, 0.0]), cov=Identity(4))
    assert np.allclose(m.mu, [2.0, 0, 0, 0])
    assert np.array_equal(m.null().mu, np.zeros(4))
    assert m.null().cov == m.cov


def test_null_model_draws_centered():
    m = MeanShiftModel(d=3, mu=np.full(3, 5.0), cov=Identity(3))
    x = sample(m.null(), 4000, RngStream(1))
    assert abs(x.mean()) < 0.1


def test_sample_mean_and_cov_match_model():
    d = 3
    cov = Spiked(sigma2=0.5, rho=0.5, d=d)
    m = MeanShiftModel(d=d, mu=np.array([1.0, -1.0, 0.0]), cov=cov)
    x = sample(m, 60_000, RngStream(7))
    assert np.allclose(x.mean(axis=0), m.mu, atol=0.05)
    emp = np.cov(x.T)
    assert np.allclose(emp, dense(cov, d), atol=0.05)


def test_score_is_negative_whitened_residual():
    # standard normal target: score(x) = -(x - mu) under identity covariance
    m = MeanShiftModel(d=2, mu=np.zeros(2), cov=Identity(2))
    x = np.array([[1.0, -2.0], [0.5, 0.0]])
    assert np.allclose(score(m, x), -x)


def test_score_solves_covariance():
    cov = Diagonal((1.0, 2.0, 4.0, 0.5))
    m = MeanShiftModel(d=4, mu=np.zeros(4), cov=cov)
    x = np.arange(8.0).reshape(2, 4)
    assert np.allclose(score(m, x), -x / np.array([1.0, 2.0, 4.0, 0.5]))


def test_spiked_score_matches_dense_solve():
    d = 6
    cov = Spiked(sigma2=0.5, rho=0.5, d=d)
    m = MeanShiftModel(d=d, mu=np.zeros(d), cov=cov)
    x = np.random.default_rng(3).normal(size=(4, d))
    expect = -np.linalg.solve(dense(cov, d), x.T).T
    assert np.allclose(score(m, x), expect)


def test_score_requires_centred_target():
    from hidim_ustat.errors import TargetNotCentered
    m = MeanShiftModel(d=2, mu=np.array([1.0, 0.0]), cov=Identity(2))
    with pytest.raises(TargetNotCentered):
        score(m, np.zeros((1, 2)))


def test_stream_replay_is_exact():
    s = RngStream(base_seed=20240, seed_index=3, replicate_index=11)
    a = s.generator().normal(size=8)
    b = s.generator().normal(size=8)
    assert np.array_equal(a, b)


def test_streams_differ_across_indices():
    base = RngStream(5, 0, 0).generator().normal(size=16)
    for other in (RngStream(5, 1, 0), RngStream(5, 0, 1), RngStream(6, 0, 0)):
        assert not np.array_equal(base, other.generator().normal(size=16))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 10_000), st.integers(0, 10_000))
def test_stream_keys_distinct_from_neighbours(base, si, ri):
    k = RngStream(base, si, ri).key()
    assert k != RngStream(base, si, ri + 1).key()
    assert k != RngStream(base, si + 1, ri).key()


def test_invalid_dimension_rejected():
    with pytest.raises(ValueError):
        MeanShiftModel(d=0, mu=np.zeros(0), cov=Identity(0))
    with pytest.raises(ValueError):
        Spiked(sigma2=-1.0, rho=0.0, d=3)
