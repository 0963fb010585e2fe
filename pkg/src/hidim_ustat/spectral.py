"""Truncated feature decompositions of the RBF kernel at small d.

The RBF kernel factorises per coordinate as
    exp(-(x - x')^2 / (2 g)) = sum_k (1/(k! g^k)) x^k x'^k e^{-x^2/(2g)} e^{-x'^2/(2g)}
(the exponential series for e^{x x'/g}), so truncating each coordinate at
degree K gives a rank-(K+1)^d approximation with explicit eigenvalues
alpha_k = prod_j 1/(k_j! g^{k_j}) and features psi_k(x) = prod_j x_j^{k_j}
e^{-x_j^2/(2 g)}.  MMD summand features are differences psi_k(x) - psi_k(y).
Fitting the empirical mean/covariance of the feature vector produces the
inputs (Lambda, Sigma_K, mu_K) for the quadratic-form simulator, whose
eigenvalues tau_k = eig(Sigma_K^{1/2} Lambda Sigma_K^{1/2}) are the weights
of the candidate chi-square-sum limit.

This module exists to validate the limit theory at d <= 3; it is not a
scalable feature map ((K+1)^d is hard-capped).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import NotPSD, UnsupportedSummand
from .kernels import Fixed, Linear, RBF
from .model import Identity, MeanShiftModel, RngStream, sample_with
from .ustat import KSD, MMD, PairedSample, SummandSpec, _rbf_gamma, u_statistic

_MAX_FEATURES_EVAL = 4096
_MAX_FEATURES_FIT = 512


@dataclass(frozen=True)
class RbfBasis:
    """Per-coordinate degree-K truncation of the RBF kernel at bandwidth gamma."""

    gamma: float
    d: int
    degree: int

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not 1 <= self.d <= 3:
            raise ValueError(f"d must be in {{1,2,3}}, got {self.d}")
        if self.degree < 0:
            raise ValueError(f"degree must be >= 0, got {self.degree}")
        if (self.degree + 1) ** self.d > _MAX_FEATURES_EVAL:
            raise ValueError(f"(degree+1)^d = {(self.degree + 1) ** self.d} exceeds {_MAX_FEATURES_EVAL}")

    @property
    def n_features(self) -> int:
        return (self.degree + 1) ** self.d

    def indices(self) -> np.ndarray:
        """All multi-indices (k_1..k_d), k_j in 0..degree, C order."""
        return np.array(list(itertools.product(range(self.degree + 1), repeat=self.d)), dtype=int)

    def alphas(self) -> np.ndarray:
        """alpha_k = prod_j 1/(k_j! gamma^{k_j}) for every enumerated index."""
        k1 = np.arange(self.degree + 1)
        per_deg = 1.0 / (np.array([math.factorial(int(k)) for k in k1]) * self.gamma ** k1)
        out = per_deg
        for _ in range(self.d - 1):
            out = (out[:, None] * per_deg[None, :]).reshape(-1)
        return out

    def features(self, x: np.ndarray) -> np.ndarray:
        """psi_k for all indices: (n, d) -> (n, (degree+1)^d), same order as indices()."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"points have dimension {x.shape[1]}, basis has d={self.d}")
        env = np.exp(-(x * x) / (2.0 * self.gamma))
        k1 = np.arange(self.degree + 1)
        out = None
        for j in range(self.d):
            col = (x[:, j][:, None] ** k1[None, :]) * env[:, j][:, None]
            out = col if out is None else (out[:, :, None] * col[:, None, :]).reshape(x.shape[0], -1)
        return out


def _partial_exp(t: np.ndarray, degree: int) -> np.ndarray:
    """sum_{k=0}^{degree} t^k / k!, evaluated termwise (t elementwise)."""
    acc = np.ones_like(t)
    term = np.ones_like(t)
    for k in range(1, degree + 1):
        term = term * t / k
        acc = acc + term
    return acc


def _truncated_kernel(basis: RbfBasis, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-paired truncated kernel values sum_k alpha_k psi_k(a_i) psi_k(b_i),
    computed as the product over coordinates of 1-D partial exponential sums."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    t = a * b / basis.gamma
    s = _partial_exp(t, basis.degree).prod(axis=1)
    env = np.exp(-(np.sum(a * a, axis=1) + np.sum(b * b, axis=1)) / (2.0 * basis.gamma))
    return s * env


def rbf_truncated_eval(basis: RbfBasis, x: np.ndarray, x2: np.ndarray) -> float:
    """Truncated kernel at one pair of points."""
    return float(_truncated_kernel(basis, np.asarray(x, dtype=float)[None, :],
                                   np.asarray(x2, dtype=float)[None, :])[0])


def mmd_feature(basis: RbfBasis, z, k) -> float:
    """phi_k(z) = psi_k(x) - psi_k(y) for z = (x, y) and multi-index k."""
    x, y = z
    k = np.asarray(k, dtype=int).reshape(-1)
    if k.shape[0] != basis.d or np.any(k < 0) or np.any(k > basis.degree):
        raise ValueError(f"multi-index {k.tolist()} out of range for degree {basis.degree}, d={basis.d}")
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)

    def psi(v):
        return float(np.prod(v ** k) * math.exp(-float(v @ v) / (2.0 * basis.gamma)))

    return psi(x) - psi(y)


def _truncated_summand(spec: Union[MMD, RBF], basis: RbfBasis,
                       a1: np.ndarray, b1: np.ndarray,
                       a2: Optional[np.ndarray], b2: Optional[np.ndarray]) -> np.ndarray:
    # MMD: u_K(z, z') = S(x,x') + S(y,y') - S(x,y') - S(x',y) with S the
    # truncated kernel (the cross terms of (psi(x)-psi(y))(psi(x')-psi(y'))).
    if isinstance(spec, RBF):
        return _truncated_kernel(basis, a1, b1)
    return (_truncated_kernel(basis, a1, b1) + _truncated_kernel(basis, a2, b2)
            - _truncated_kernel(basis, a1, b2) - _truncated_kernel(basis, b1, a2))


def epsilon_K(spec: Union[SummandSpec, RBF], basis: RbfBasis, model: MeanShiftModel,
              nu: int, n_mc: int, stream: RngStream) -> float:
    """L_nu truncation error (E |u_K(Z, Z') - u(Z, Z')|^nu)^(1/nu) over n_mc
    independent pairs.  Supports the MMD-RBF summand and the raw RBF kernel."""
    if isinstance(spec, KSD):
        raise UnsupportedSummand("no truncated feature basis for KSD summands")
    if nu not in (1, 2, 3):
        raise ValueError(f"nu must be 1, 2 or 3, got {nu}")
    if model.d != basis.d:
        raise ValueError(f"model d={model.d} differs from basis d={basis.d}")
    if isinstance(spec, MMD):
        if not isinstance(spec.kernel, RBF):
            raise UnsupportedSummand("truncation error is defined for RBF-kernel MMD")
        if _rbf_gamma(spec.kernel) != basis.gamma:
            raise ValueError("kernel bandwidth differs from the basis bandwidth")
    elif isinstance(spec, RBF) and _rbf_gamma(spec) != basis.gamma:
        raise ValueError("kernel bandwidth differs from the basis bandwidth")
    rng = stream.generator()
    x1 = sample_with(model, n_mc, rng)
    x2 = sample_with(model, n_mc, rng)
    g = basis.gamma

    def kvals(a, b):
        return np.exp(-np.sum((a - b) ** 2, axis=1) / (2.0 * g))

    if isinstance(spec, RBF):
        exact = kvals(x1, x2)
        trunc = _truncated_summand(spec, basis, x1, x2, None, None)
    else:
        null = model.null()
        y1 = sample_with(null, n_mc, rng)
        y2 = sample_with(null, n_mc, rng)
        exact = kvals(x1, x2) + kvals(y1, y2) - kvals(x1, y2) - kvals(x2, y1)
        trunc = _truncated_summand(spec, basis, x1, x2, y1, y2)
    return float(np.mean(np.abs(trunc - exact) ** nu) ** (1.0 / nu))


@dataclass(frozen=True)
class TruncatedRep:
    """Inputs for the quadratic-form simulator: feature eigenvalues Lambda
    (diagonal), empirical feature mean mu_k and covariance sigma_k, and the
    limit weights tau = eig(sigma_k^{1/2} Lambda sigma_k^{1/2}) descending."""

    lam: np.ndarray
    mu_k: np.ndarray
    sigma_k: np.ndarray
    tau: np.ndarray
    n_fit: int


def fit_truncated_rep(spec: SummandSpec, basis: Optional[RbfBasis],
                      model: MeanShiftModel, n_fit: int, stream: RngStream) -> TruncatedRep:
    """Sample mean/covariance of the summand's feature vector and the induced
    limit weights tau.

    MMD-RBF uses phi(Z) = psi(X) - psi(Y) with Lambda = diag(alpha); linear
    MMD uses the exact finite features X - Y with Lambda = I (no basis
    needed); a raw RBF spec uses one-sample features psi(X).
    """
    if isinstance(spec, KSD):
        raise UnsupportedSummand("no truncated feature basis for KSD summands")
    if n_fit < 2:
        raise ValueError(f"need n_fit >= 2, got {n_fit}")
    rng = stream.generator()
    if isinstance(spec, MMD) and isinstance(spec.kernel, Linear):
        x = sample_with(model, n_fit, rng)
        y = sample_with(model.null(), n_fit, rng)
        feats = x - y
        lam = np.ones(model.d)
    else:
        if basis is None:
            raise ValueError("RBF truncation needs a basis")
        if basis.n_features > _MAX_FEATURES_FIT:
            raise ValueError(f"feature count {basis.n_features} exceeds {_MAX_FEATURES_FIT}")
        if model.d != basis.d:
            raise ValueError(f"model d={model.d} differs from basis d={basis.d}")
        lam = basis.alphas()
        if isinstance(spec, MMD):
            if _rbf_gamma(spec.kernel) != basis.gamma:
                raise ValueError("kernel bandwidth differs from the basis bandwidth")
            x = sample_with(model, n_fit, rng)
            y = sample_with(model.null(), n_fit, rng)
            feats = basis.features(x) - basis.features(y)
        elif isinstance(spec, RBF):
            feats = basis.features(sample_with(model, n_fit, rng))
        else:
            raise UnsupportedSummand(f"no feature map for {type(spec).__name__}")

    mu_k = feats.mean(axis=0)
    sigma_k = np.cov(feats, rowvar=False, ddof=1)
    sigma_k = np.atleast_2d(sigma_k)

    evals, evecs = np.linalg.eigh((sigma_k + sigma_k.T) / 2.0)
    norm = float(np.max(np.abs(evals))) if evals.size else 0.0
    if norm > 0 and float(evals.min()) < -1e-8 * norm:
        raise NotPSD(f"feature covariance eigenvalue {evals.min():.3e} below -1e-8 * spectral norm")
    evals = np.clip(evals, 0.0, None)
    sqrt_sigma = (evecs * np.sqrt(evals)[None, :]) @ evecs.T
    m_mat = sqrt_sigma @ (lam[:, None] * sqrt_sigma)
    tau = np.linalg.eigvalsh((m_mat + m_mat.T) / 2.0)[::-1].copy()
    return TruncatedRep(lam=lam, mu_k=mu_k, sigma_k=sigma_k, tau=tau, n_fit=n_fit)


@dataclass(frozen=True)
class SpectralRow:
    K: int
    eps: Tuple[float, float, float]
    ks_unk_vs_dn: float
    tau_top5: Tuple[float, ...]


def run_spectral_table(model: MeanShiftModel, gamma: float, n: int, k_grid,
                       base_seed: int, n_mc: int = 20000, n_fit: int = 100_000,
                       reps: int = 10_000):
    """Per truncation degree K: the three L_nu truncation errors, the KS
    distance between the simulated quadratic-form distribution U_n^K and MC
    samples of the MMD-RBF statistic D_n, and the top limit weights tau.

    The truncation-error pairs, the fitting sample and the D_n replicates
    each reuse one stream across the whole K grid, so rows are paired
    comparisons (monotonicity in K is not blurred by fresh noise).
    """
    from .limits import Empirical, kolmogorov_distance, unk_simulator
    from .moments import closed_form_mmd_rbf_moments, empirical_moments

    spec = MMD(RBF(Fixed(gamma)))
    if isinstance(model.cov, Identity):
        ms = closed_form_mmd_rbf_moments(model.d, gamma, float(model.mu @ model.mu))
    else:
        ms = empirical_moments(spec, model, max(4000, 4 * n), RngStream(base_seed, 4, 0))

    rng = RngStream(base_seed, 3, 0).generator()
    dn = np.empty(reps)
    null = model.null()
    for r in range(reps):
        data = PairedSample(sample_with(model, n, rng), sample_with(null, n, rng))
        dn[r] = u_statistic(spec, data)
    dn.sort()

    rows = []
    for K in k_grid:
        basis = RbfBasis(gamma=gamma, d=model.d, degree=int(K))
        eps = tuple(epsilon_K(spec, basis, model, nu, n_mc, RngStream(base_seed, 0, 0))
                    for nu in (1, 2, 3))
        rep = fit_truncated_rep(spec, basis, model, n_fit, RngStream(base_seed, 1, 0))
        unk = unk_simulator(rep.lam, rep.sigma_k, rep.mu_k, n, ms.D, reps,
                            RngStream(base_seed, 2, 0))
        ks = kolmogorov_distance(dn, Empirical(samples=unk))
        rows.append(SpectralRow(K=int(K), eps=eps, ks_unk_vs_dn=ks,
                                tau_top5=tuple(float(t) for t in rep.tau[:5])))
    return tuple(rows)


def write_spectral_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        f.write("K,eps_1,eps_2,eps_3,ks_unk_vs_dn,tau_top5\n")
        for r in rows:
            tau = ";".join(repr(t) for t in r.tau_top5)
            f.write(f"{r.K},{r.eps[0]!r},{r.eps[1]!r},{r.eps[2]!r},{r.ks_unk_vs_dn!r},{tau}\n")
