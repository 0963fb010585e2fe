"""Per-coordinate RBF feature truncation and the quadratic-form surrogate."""

import math

import numpy as np
import pytest

from hidim_ustat.errors import UnsupportedSummand
from hidim_ustat.kernels import RBF, Fixed, Linear, rbf_eval
from hidim_ustat.model import Identity, MeanShiftModel, RngStream
from hidim_ustat.spectral import (RbfBasis, SpectralRow, epsilon_K,
                                  fit_truncated_rep, mmd_feature,
                                  rbf_truncated_eval, run_spectral_table,
                                  write_spectral_csv)
from hidim_ustat.ustat import KSD, MMD


def test_basis_validation():
    with pytest.raises(ValueError):
        RbfBasis(gamma=0.0, d=1, degree=3)
    with pytest.raises(ValueError):
        RbfBasis(gamma=1.0, d=4, degree=3)
    with pytest.raises(ValueError):
        RbfBasis(gamma=1.0, d=3, degree=30)  # 31^3 > 4096
    assert RbfBasis(gamma=1.0, d=2, degree=5).n_features == 36


def test_feature_expansion_equals_partial_sum():
    # sum_k alpha_k psi_k(a) psi_k(b) must equal the product of per-coordinate
    # partial exponential sums times the Gaussian envelopes
    basis = RbfBasis(gamma=1.7, d=2, degree=6)
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 2))
    b = rng.normal(size=(5, 2))
    fa = basis.features(a)
    fb = basis.features(b)
    alpha = basis.alphas()
    direct = (fa * alpha[None, :] * fb).sum(axis=1)
    paired = [rbf_truncated_eval(basis, a[i], b[i]) for i in range(5)]
    assert np.allclose(direct, paired, rtol=1e-13)


def test_truncated_kernel_converges_to_rbf():
    gamma = 2.0
    x = np.array([0.7, -0.3])
    x2 = np.array([-0.2, 0.9])
    exact = rbf_eval(gamma, x, x2)
    errs = [abs(rbf_truncated_eval(RbfBasis(gamma, 2, K), x, x2) - exact)
            for K in (0, 2, 4, 8, 12)]
    assert errs[-1] < 1e-10
    assert all(errs[i + 1] <= errs[i] + 1e-15 for i in range(len(errs) - 1))


def test_feature_ordering_matches_indices():
    basis = RbfBasis(gamma=1.0, d=2, degree=2)
    idx = basis.indices()
    x = np.array([[0.5, -1.5]])
    feats = basis.features(x)[0]
    env = math.exp(-(0.25 + 2.25) / 2.0)
    for row, k in enumerate(idx):
        want = (0.5 ** k[0]) * ((-1.5) ** k[1]) * env
        assert feats[row] == pytest.approx(want, rel=1e-12)


def test_mmd_feature_is_feature_difference():
    basis = RbfBasis(gamma=3.0, d=1, degree=4)
    x, y = np.array([0.8]), np.array([-0.4])
    for k in range(5):
        got = mmd_feature(basis, (x, y), [k])
        want = basis.features(x[None, :])[0, k] - basis.features(y[None, :])[0, k]
        assert got == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        mmd_feature(basis, (x, y), [7])


def test_epsilon_decreases_in_k_and_nu_is_ordered():
    model = MeanShiftModel(d=1, mu=np.array([2.0]), cov=Identity(1))
    spec = MMD(RBF(Fixed(10.0)))
    s = RngStream(99, 0, 0)
    eps1 = [epsilon_K(spec, RbfBasis(10.0, 1, K), model, 1, 4000, s)
            for K in (1, 3, 6, 10)]
    assert all(eps1[i + 1] < eps1[i] for i in range(3))
    basis = RbfBasis(10.0, 1, 3)
    e1 = epsilon_K(spec, basis, model, 1, 4000, s)
    e2 = epsilon_K(spec, basis, model, 2, 4000, s)
    e3 = epsilon_K(spec, basis, model, 3, 4000, s)
    assert e1 <= e2 <= e3   # Lyapunov ordering on the same pairs


def test_epsilon_rejects_ksd_and_bandwidth_mismatch():
    model = MeanShiftModel(d=1, mu=np.zeros(1), cov=Identity(1))
    basis = RbfBasis(2.0, 1, 3)
    with pytest.raises(UnsupportedSummand):
        epsilon_K(KSD(gamma=2.0, target=model), basis, model, 1, 100, RngStream(0))
    with pytest.raises(ValueError):
        epsilon_K(MMD(RBF(Fixed(3.0))), basis, model, 1, 100, RngStream(0))


def test_fit_linear_mmd_recovers_covariance_weights():
    # X - Y ~ N(mu, 2I): tau should approach 2 * ones(d)
    model = MeanShiftModel(d=4, mu=np.array([1.0, 0, 0, 0]), cov=Identity(4))
    rep = fit_truncated_rep(MMD(Linear()), None, model, 40_000, RngStream(5))
    assert np.allclose(rep.lam, 1.0)
    assert np.allclose(rep.tau, 2.0, atol=0.12)
    assert rep.tau.shape == (4,)
    assert np.all(np.diff(rep.tau) <= 0)


def test_fit_truncated_rep_reconstructs_full_variance():
    # u(z, z') = phi(z)' Lambda phi(z') gives Var u = sum tau^2 (quadratic
    # part, tau = eig(Sigma^{1/2} Lambda Sigma^{1/2})) plus twice the linear
    # part (Lambda mu)' Sigma (Lambda mu); at K=12 truncation is negligible
    from hidim_ustat.moments import closed_form_mmd_rbf_moments
    gamma = 10.0
    model = MeanShiftModel(d=1, mu=np.array([2.0]), cov=Identity(1))
    basis = RbfBasis(gamma, 1, 12)
    rep = fit_truncated_rep(MMD(RBF(Fixed(gamma))), basis, model, 60_000, RngStream(8))
    b = rep.lam * rep.mu_k
    var_u = float(np.sum(rep.tau**2) + 2.0 * b @ rep.sigma_k @ b)
    ms = closed_form_mmd_rbf_moments(1, gamma, 4.0)
    assert var_u == pytest.approx(ms.sigma_full**2, rel=0.05)


def test_spectral_table_shapes_and_csv(tmp_path):
    model = MeanShiftModel(d=1, mu=np.array([2.0]), cov=Identity(1))
    rows = run_spectral_table(model, gamma=10.0, n=30, k_grid=(1, 4),
                              base_seed=7, n_mc=500, n_fit=2000, reps=400)
    assert len(rows) == 2
    assert rows[0].K == 1 and rows[1].K == 4
    assert rows[1].eps[1] < rows[0].eps[1]
    for r in rows:
        # K+1 features at d=1, so tau_top5 may carry fewer than 5 weights
        assert len(r.tau_top5) == min(5, r.K + 1)
        assert 0.0 <= r.ks_unk_vs_dn <= 1.0
    out = tmp_path / "spec.csv"
    write_spectral_csv(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "K,eps_1,eps_2,eps_3,ks_unk_vs_dn,tau_top5"
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "1"
    assert len(lines[2].split(",")[5].split(";")) == 5


def test_spectral_table_deterministic():
    model = MeanShiftModel(d=1, mu=np.array([1.0]), cov=Identity(1))
    a = run_spectral_table(model, gamma=5.0, n=10, k_grid=(2,), base_seed=3,
                           n_mc=300, n_fit=1000, reps=200)
    b = run_spectral_table(model, gamma=5.0, n=10, k_grid=(2,), base_seed=3,
                           n_mc=300, n_fit=1000, reps=200)
    assert a == b
