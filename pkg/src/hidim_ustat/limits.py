"""Candidate limiting distributions for D_n and the Kolmogorov distance.

Four analytic families compete to describe D_n at a given (n, d):
  Gaussian            N(D, 4 sigma2_cond / n), the non-degenerate CLT limit
  Gamma               moment-matched to (D, v), v = 2 sigma2_full/(n(n-1))
  ShiftedScaledChiSq  a (xi^2 - 1) + D with 2 a^2 = v, a single chi-square
  WeightedChiSqSum    (1/sqrt(n(n-1))) sum_k tau_k (xi_k^2 - 1) + D, the
                      quadratic-form limit with explicit weights
plus Empirical (a sorted Monte-Carlo sample standing in for a law without a
usable closed form).  Everything here is mean-variance exact: matched
variants reproduce (D, v) to floating-point accuracy by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple, Union

import numpy as np
from scipy import special

from .errors import (DegenerateGaussianLimitWarning, GammaMatchInfeasible, InvalidInput,
                     NotPSD, UnsupportedAnalyticCdf)
from .model import CovSpec, RngStream, cov_eigenvalues
from .moments import MomentSet

import warnings

# Replicate-chunk budget for the quadratic-form simulator: 2^22 float64 cells.
_SIM_CHUNK_CELLS = 1 << 22
_UNK_MAX_K = 512


@dataclass(frozen=True)
class Gaussian:
    mean: float
    var: float

    def __post_init__(self):
        if self.var < 0:
            raise ValueError(f"variance must be >= 0, got {self.var}")


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError(f"Gamma needs shape > 0 and scale > 0, got {self.shape}, {self.scale}")


@dataclass(frozen=True)
class ShiftedScaledChiSq:
    """a (xi^2 - 1) + shift for a standard normal xi; a = 0 is a point mass."""

    a: float
    shift: float


@dataclass(frozen=True)
class WeightedChiSqSum:
    """(1/sqrt(n(n-1))) sum_k tau_k (xi_k^2 - 1) + shift, iid standard normal xi_k."""

    weights: Tuple[float, ...]
    n: int
    shift: float

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) == 0:
            raise ValueError("need at least one weight")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")


@dataclass(frozen=True)
class Empirical:
    """A sorted sample; its step ECDF serves as the reference CDF."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).reshape(-1))
        if s.size == 0:
            raise ValueError("need at least one sample")
        object.__setattr__(self, "samples", s)


LimitSpec = Union[Gaussian, Gamma, ShiftedScaledChiSq, WeightedChiSqSum, Empirical]


def limit_spec_json(spec: LimitSpec) -> dict:
    if isinstance(spec, Gaussian):
        return {"gauss": {"mean": spec.mean, "var": spec.var}}
    if isinstance(spec, Gamma):
        return {"gamma": {"shape": spec.shape, "scale": spec.scale}}
    if isinstance(spec, ShiftedScaledChiSq):
        return {"chisq1": {"a": spec.a, "shift": spec.shift}}
    if isinstance(spec, WeightedChiSqSum):
        return {"wchisq": {"weights": list(spec.weights), "n": spec.n, "shift": spec.shift}}
    raise TypeError(f"no JSON form for {type(spec).__name__}")


# ---------------------------------------------------------------------------
# constructors from moment sets


def nondegenerate_limit(ms: MomentSet, n: int) -> Gaussian:
    """N(D, 4 sigma2_cond / n).  sigma_cond = 0 degenerates to a point mass
    at D; that is flagged with a warning because the Gaussian regime carries
    no information there."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if ms.sigma_cond == 0.0:
        warnings.warn("sigma_cond = 0: Gaussian limit degenerates to a point mass at D",
                      DegenerateGaussianLimitWarning)
        return Gaussian(ms.D, 0.0)
    return Gaussian(ms.D, 4.0 * ms.sigma_cond ** 2 / n)


def _matched_v(ms: MomentSet, n: int) -> float:
    return 2.0 * ms.sigma_full ** 2 / (n * (n - 1.0))


def gamma_matched_limit(ms: MomentSet, n: int) -> Gamma:
    """Gamma with the same mean D and variance v = 2 sigma2_full/(n(n-1)):
    shape = D^2/v, scale = v/D.  Needs D > 0 (support) and v > 0."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if ms.D <= 0.0:
        raise GammaMatchInfeasible(f"gamma matching needs D > 0, got D={ms.D}")
    v = _matched_v(ms, n)
    if v <= 0.0:
        raise GammaMatchInfeasible("gamma matching needs sigma_full > 0")
    return Gamma(shape=ms.D * ms.D / v, scale=v / ms.D)


def chisq_matched_limit(ms: MomentSet, n: int) -> ShiftedScaledChiSq:
    """a (xi^2 - 1) + D with a = sigma_full/sqrt(n(n-1)), so the variance
    2 a^2 matches v exactly; valid for any sign of D."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return ShiftedScaledChiSq(a=ms.sigma_full / math.sqrt(n * (n - 1.0)), shift=ms.D)


def linear_mmd_exact_limit(mu: np.ndarray, cov: CovSpec, n: int) -> WeightedChiSqSum:
    """The exact law of the linear-kernel MMD statistic under Gaussians in
    the degenerate direction: weights tau_k = 2 lambda_k(Sigma), shift
    ||mu||^2.  (The summand features x - y have covariance 2 Sigma.)"""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != cov.d:
        raise ValueError(f"mu has length {mu.shape[0]}, cov has d={cov.d}")
    weights = 2.0 * cov_eigenvalues(cov)
    return WeightedChiSqSum(tuple(weights), n, float(mu @ mu))


# ---------------------------------------------------------------------------
# the generic quadratic-form simulator


def unk_simulator(lam: np.ndarray, sigma_k: np.ndarray, mu_k: np.ndarray,
                  n: int, D: float, reps: int, stream: RngStream) -> np.ndarray:
    """Samples of the K-dimensional quadratic form

        U = (1/(n(n-1))) sum_{i != j} eta_i^T M eta_j + (2/n) sum_i b^T eta_i + D,

    M = Sigma^(1/2) diag(lam) Sigma^(1/2), b = Sigma^(1/2) diag(lam) mu, with
    eta_i iid standard normal K-vectors.  Diagonalising M once turns each
    replicate into O(nK) work via sum_{i != j} a_i^T M a_j =
    (sum a)^T M (sum a) - sum_i a_i^T M a_i in the eigenbasis (a rotation of
    a standard Gaussian vector is again standard Gaussian, so sampling in the
    eigenbasis is exact).  Eigenvalues of sigma_k below -1e-8 of the spectral
    norm raise NotPSD; small negatives are clamped to 0.
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    mu_k = np.asarray(mu_k, dtype=float).reshape(-1)
    sigma_k = np.asarray(sigma_k, dtype=float)
    K = lam.shape[0]
    if K > _UNK_MAX_K:
        raise ValueError(f"K={K} exceeds the supported maximum {_UNK_MAX_K}")
    if sigma_k.shape != (K, K) or mu_k.shape[0] != K:
        raise ValueError("lam, sigma_k, mu_k dimensions disagree")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")

    evals, evecs = np.linalg.eigh((sigma_k + sigma_k.T) / 2.0)
    norm = float(np.max(np.abs(evals))) if evals.size else 0.0
    if norm > 0 and float(evals.min()) < -1e-8 * norm:
        raise NotPSD(f"sigma_k has eigenvalue {evals.min():.3e} below -1e-8 * spectral norm")
    evals = np.clip(evals, 0.0, None)
    root = evecs * np.sqrt(evals)[None, :]            # Sigma^(1/2) = V sqrt(L) V^T, as V sqrt(L)
    sqrt_sigma = root @ evecs.T
    m_mat = sqrt_sigma @ (lam[:, None] * sqrt_sigma)
    omega, w = np.linalg.eigh((m_mat + m_mat.T) / 2.0)
    b_rot = w.T @ (sqrt_sigma @ (lam * mu_k))

    rng = stream.generator()
    out = np.empty(reps)
    chunk = max(1, _SIM_CHUNK_CELLS // max(n * K, 1))
    npairs = float(n) * (n - 1.0)
    for r0 in range(0, reps, chunk):
        r1 = min(reps, r0 + chunk)
        z = rng.standard_normal((r1 - r0, n, K))
        s = z.sum(axis=1)                              # (r, K)
        quad = (s * s) @ omega - np.einsum("rnk,k->r", z * z, omega)
        out[r0:r1] = quad / npairs + (2.0 / n) * (s @ b_rot) + D
    return out


# ---------------------------------------------------------------------------
# sampling, CDFs, moments, KS


def limit_sample(spec: LimitSpec, reps: int, stream: RngStream) -> np.ndarray:
    """reps i.i.d. draws.  WeightedChiSqSum groups equal weights so a group
    of m unit-variance chi-squares costs one Gamma(m/2, 2) draw; Empirical
    resamples with replacement."""
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    rng = stream.generator()
    if isinstance(spec, Gaussian):
        if spec.var == 0.0:
            return np.full(reps, spec.mean)
        return rng.normal(spec.mean, math.sqrt(spec.var), size=reps)
    if isinstance(spec, Gamma):
        return rng.gamma(spec.shape, spec.scale, size=reps)
    if isinstance(spec, ShiftedScaledChiSq):
        if spec.a == 0.0:
            return np.full(reps, spec.shift)
        xi = rng.standard_normal(reps)
        return spec.a * (xi * xi - 1.0) + spec.shift
    if isinstance(spec, WeightedChiSqSum):
        scale = 1.0 / math.sqrt(spec.n * (spec.n - 1.0))
        uniq, counts = np.unique(np.asarray(spec.weights), return_counts=True)
        acc = np.full(reps, spec.shift)
        for tau, m in zip(uniq, counts):
            chi = rng.gamma(0.5 * m, 2.0, size=reps)   # chi-square with m dof
            acc += scale * tau * (chi - float(m))
        return acc
    if isinstance(spec, Empirical):
        return rng.choice(spec.samples, size=reps, replace=True)
    raise TypeError(f"unknown limit spec {spec!r}")


def limit_cdf(spec: LimitSpec, t) -> np.ndarray:
    """CDF at t (scalar or array).  WeightedChiSqSum has no analytic CDF here;
    convert it to Empirical via limit_sample first."""
    t = np.asarray(t, dtype=float)
    if isinstance(spec, Gaussian):
        if spec.var == 0.0:
            return (t >= spec.mean).astype(float)
        return special.ndtr((t - spec.mean) / math.sqrt(spec.var))
    if isinstance(spec, Gamma):
        return special.gammainc(spec.shape, np.maximum(t, 0.0) / spec.scale)
    if isinstance(spec, ShiftedScaledChiSq):
        if spec.a == 0.0:
            return (t >= spec.shift).astype(float)
        arg = (t - spec.shift) / spec.a + 1.0
        chi_cdf = special.gammainc(0.5, np.maximum(arg, 0.0) / 2.0)
        return chi_cdf if spec.a > 0 else 1.0 - chi_cdf
    if isinstance(spec, Empirical):
        return np.searchsorted(spec.samples, t, side="right") / spec.samples.size
    if isinstance(spec, WeightedChiSqSum):
        raise UnsupportedAnalyticCdf("WeightedChiSqSum has no closed CDF; sample it instead")
    raise TypeError(f"unknown limit spec {spec!r}")


class LimitMoments(NamedTuple):
    mean: float
    variance: float
    third_central: float
    excess_kurtosis: float
    estimated: bool = False


def limit_moments(spec: LimitSpec) -> LimitMoments:
    """Exact (mean, variance, third central moment, excess kurtosis) for the
    analytic variants; Empirical estimates them from the stored sample and
    sets the estimated flag.  The WeightedChiSqSum excess kurtosis
    12 sum tau^4 / (sum tau^2)^2 -> 0 as the weights spread out, which is the
    quantitative sense in which many comparable weights Gaussianise."""
    if isinstance(spec, Gaussian):
        return LimitMoments(spec.mean, spec.var, 0.0, 0.0)
    if isinstance(spec, Gamma):
        k, th = spec.shape, spec.scale
        return LimitMoments(k * th, k * th * th, 2.0 * k * th ** 3, 6.0 / k)
    if isinstance(spec, ShiftedScaledChiSq):
        a = spec.a
        # central moments of a(xi^2-1): E=0, 2a^2, 8a^3, 60a^4
        kurt = 12.0 if a != 0.0 else 0.0
        return LimitMoments(spec.shift, 2.0 * a * a, 8.0 * a ** 3, kurt)
    if isinstance(spec, WeightedChiSqSum):
        tau = np.asarray(spec.weights)
        npairs = float(spec.n) * (spec.n - 1.0)
        t2, t3, t4 = float(np.sum(tau ** 2)), float(np.sum(tau ** 3)), float(np.sum(tau ** 4))
        var = 2.0 * t2 / npairs
        third = 8.0 * t3 / npairs ** 1.5
        kurt = 12.0 * t4 / (t2 * t2) if t2 > 0 else 0.0
        return LimitMoments(spec.shift, var, third, kurt)
    if isinstance(spec, Empirical):
        s = spec.samples
        mean = float(s.mean())
        c = s - mean
        var = float(np.mean(c ** 2))
        third = float(np.mean(c ** 3))
        kurt = float(np.mean(c ** 4) / var ** 2 - 3.0) if var > 0 else 0.0
        return LimitMoments(mean, var, third, kurt, estimated=True)
    raise TypeError(f"unknown limit spec {spec!r}")


def kolmogorov_distance(samples: np.ndarray, spec: LimitSpec) -> float:
    """Exact one-sample Kolmogorov-Smirnov statistic
    max_i max(i/R - F(x_(i)), F(x_(i)) - (i-1)/R) for sorted samples x_(i)."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidInput("need at least one sample")
    if np.any(np.diff(x) < 0):
        raise InvalidInput("samples must be sorted ascending")
    f = np.asarray(limit_cdf(spec, x), dtype=float)
    r = x.size
    grid = np.arange(1, r + 1) / r
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / r))))
