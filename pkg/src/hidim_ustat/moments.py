"""Moment sets for degree-two U-statistics.

A MomentSet bundles the five quantities that control the limiting behaviour
of D_n: the mean D, the conditional standard deviation sigma_cond (std of
g(Z) = E[u(Z, Z') | Z]), the full standard deviation sigma_full (std of
u(Z, Z')), and the third absolute central moments M_{cond;3}, M_{full;3}.
The ratio rho_d = sigma_full / sigma_cond against sqrt(n) decides which of
the competing limits dominates.

Closed forms are available for the Gaussian mean-shift model (Q = N(mu, I),
P = N(0, I)) with KSD-RBF and MMD-RBF summands, and for linear-kernel MMD
under a general covariance.  All (.)^{d/2} factors are evaluated in log
space so d = 10^4 with gamma = d neither overflows nor underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DegenerateDenominator, InsufficientSample, NonIdentityCovariance, UnsupportedSummand
from .kernels import Linear, RBF
from .model import CovSpec, Identity, MeanShiftModel, RngStream, cov_matvec, cov_trace_sq, sample_with
from .ustat import KSD, MMD, PairedSample, SummandSpec, _rbf_gamma, summand_block

# Row-block size for streaming passes over the summand matrix: 2^23 cells
# (64 MB of float64 per block buffer).
_BLOCK_CELLS = 1 << 23
# Below this n the full n x n matrix is materialised once instead of being
# recomputed on the second (third-moment) pass.
_MATERIALIZE_MAX = 5000


@dataclass(frozen=True)
class MomentSet:
    """D, sigma_cond, sigma_full and (when available) M_{cond;3}, M_{full;3}.

    source is "closed" for exact formulas (third moments unavailable) or
    "mc" for empirical estimates from n_mc Monte-Carlo draws.  Empirical
    sets may carry bootstrap standard errors for (D, sigma2_cond,
    sigma2_full); note the SEs are for the *squared* sigmas, which is the
    scale on which the estimators are linear enough for the bootstrap.
    """

    D: float
    sigma_cond: float
    sigma_full: float
    m_cond_3: Optional[float] = None
    m_full_3: Optional[float] = None
    source: str = "closed"
    n_mc: Optional[int] = None
    boot_se: Optional[Dict[str, float]] = None


@dataclass(frozen=True)
class RatioCheck:
    """Moment ratios M_{.;3}/sigma_. and the flag 'both below the bound C'."""

    ratio_cond: float
    ratio_full: float
    bound_ok: bool


def moments_json(ms: MomentSet, n: int) -> dict:
    """JSON-ready dict; rho_d serialises as the string "inf" when sigma_cond = 0."""
    rho, sigma_max, _ = rho_and_sigma_max(ms, n)
    return {
        "D": ms.D,
        "sigma_cond": ms.sigma_cond,
        "sigma_full": ms.sigma_full,
        "m_cond_3": ms.m_cond_3,
        "m_full_3": ms.m_full_3,
        "rho_d": "inf" if math.isinf(rho) else rho,
        "sigma_max": sigma_max,
        "source": ms.source,
    }


# ---------------------------------------------------------------------------
# empirical moments


def empirical_moments(spec: SummandSpec, model: MeanShiftModel, n_mc: int,
                      stream: RngStream, n_boot: int = 0) -> MomentSet:
    """Estimate all five moments from one simulated sample of size n_mc.

    Draws X ~ Q (and Y ~ P for MMD summands) on the given stream, then runs
    the shared estimator over the off-diagonal summand matrix.  n_boot > 0
    additionally computes multiplicity-weight bootstrap standard errors for
    D-hat, sigma2_cond-hat and sigma2_full-hat (counts continue the same
    stream, so the whole call is one deterministic function of the stream).
    """
    if n_mc < 10:
        raise InsufficientSample(f"need n_mc >= 10, got {n_mc}")
    rng = stream.generator()
    X = sample_with(model, n_mc, rng)
    if isinstance(spec, MMD):
        Y = sample_with(model.null(), n_mc, rng)
        data = PairedSample(X, Y)
    else:
        data = PairedSample(X)
    return empirical_moments_from_data(spec, data, n_boot=n_boot, boot_rng=rng)


def empirical_moments_from_data(spec: SummandSpec, data: PairedSample,
                                n_boot: int = 0,
                                boot_rng: Optional[np.random.Generator] = None) -> MomentSet:
    """Moment estimators on fixed data, streaming over row blocks.

    With u_ij the off-diagonal summand values and g-hat_i = mean_{j != i} u_ij:
      D-hat           = mean_{i != j} u_ij
      sigma2_full-hat = mean u_ij^2 - D-hat^2                  (clamped at 0)
      sigma2_cond-hat = Var(g-hat) - sigma2_full-hat/(n - 1)   (clamped at 0)
      M_{full;3}-hat  = (mean |u_ij - D-hat|^3)^(1/3)
      M_{cond;3}-hat  = (mean_i |g-hat_i - D-hat|^3)^(1/3)
    The Var(g-hat) correction removes the O(sigma2_full/n) upward bias that
    would otherwise swamp sigma2_cond in the degenerate regime.

    The bootstrap resamples points with replacement, which only changes the
    multiplicity c_i of each atom (c ~ Multinomial(n, 1/n)).  Every resampled
    statistic is then a weighted read of the original matrix:
      sum_{i' != j'} u* = sum_{i != j} c_i c_j u_ij + sum_i c_i (c_i - 1) u_ii
      g*_i = (sum_{j != i} c_j u_ij + (c_i - 1) u_ii) / (n - 1)
    so 200 resamples cost two tall mat-vec products, not 200 matrix rebuilds.
    Diagonal summand values u_ii enter only these bootstrap reads.
    """
    n = data.n
    if n < 2:
        raise InsufficientSample(f"need n >= 2, got n={n}")
    if n_boot > 0 and boot_rng is None:
        raise ValueError("n_boot > 0 requires boot_rng")

    cache = summand_block(spec, data, slice(None)) if n <= _MATERIALIZE_MAX else None
    bsz = n if cache is not None else max(1, _BLOCK_CELLS // n)

    diag = np.empty(n)
    row_sum = np.empty(n)
    row_sum2 = np.empty(n)
    C = r_off = q_off = None
    if n_boot > 0:
        counts = boot_rng.multinomial(n, np.full(n, 1.0 / n), size=n_boot)
        C = counts.T.astype(float)  # (n, n_boot)
        r_off = np.empty((n, n_boot))
        q_off = np.empty((n, n_boot))

    for i0 in range(0, n, bsz):
        i1 = min(n, i0 + bsz)
        m = cache[i0:i1] if cache is not None else summand_block(spec, data, slice(i0, i1))
        rows = np.arange(i1 - i0)
        cols = np.arange(i0, i1)
        diag[i0:i1] = m[rows, cols]
        m[rows, cols] = 0.0
        row_sum[i0:i1] = m.sum(axis=1)
        m2 = m * m
        row_sum2[i0:i1] = m2.sum(axis=1)
        if n_boot > 0:
            r_off[i0:i1] = m @ C
            q_off[i0:i1] = m2 @ C

    npairs = float(n) * (n - 1)
    d_hat = float(row_sum.sum() / npairs)
    s2_full = max(float(row_sum2.sum() / npairs) - d_hat * d_hat, 0.0)
    g_hat = row_sum / (n - 1.0)
    # mean(g_hat) equals d_hat identically, so this is the plain variance
    var_g = float(np.mean((g_hat - d_hat) ** 2))
    s2_cond = max(var_g - s2_full / (n - 1.0), 0.0)
    m_cond3 = float(np.mean(np.abs(g_hat - d_hat) ** 3)) ** (1.0 / 3.0)

    acc3 = 0.0
    for i0 in range(0, n, bsz):
        i1 = min(n, i0 + bsz)
        m = cache[i0:i1] if cache is not None else summand_block(spec, data, slice(i0, i1))
        t = np.abs(m - d_hat) ** 3
        t[np.arange(i1 - i0), np.arange(i0, i1)] = 0.0
        acc3 += float(t.sum())
    m_full3 = (acc3 / npairs) ** (1.0 / 3.0)

    boot_se = None
    if n_boot > 0:
        cc1 = C * (C - 1.0)
        s1_star = (C * r_off).sum(axis=0) + (cc1 * diag[:, None]).sum(axis=0)
        d_star = s1_star / npairs
        s2_star = (C * q_off).sum(axis=0) + (cc1 * (diag * diag)[:, None]).sum(axis=0)
        s2f_star = np.maximum(s2_star / npairs - d_star * d_star, 0.0)
        g_star = (r_off + (C - 1.0) * diag[:, None]) / (n - 1.0)
        var_g_star = (C * (g_star - d_star[None, :]) ** 2).sum(axis=0) / n
        s2c_star = np.maximum(var_g_star - s2f_star / (n - 1.0), 0.0)
        boot_se = {
            "D": float(np.std(d_star, ddof=1)),
            "sigma2_cond": float(np.std(s2c_star, ddof=1)),
            "sigma2_full": float(np.std(s2f_star, ddof=1)),
        }

    return MomentSet(d_hat, math.sqrt(s2_cond), math.sqrt(s2_full),
                     m_cond3, m_full3, source="mc", n_mc=n, boot_se=boot_se)


# ---------------------------------------------------------------------------
# closed forms (Gaussian mean-shift model)


def _log_ratio(gamma: float, *offsets: float) -> float:
    """log prod_c gamma/(gamma + c), via log1p for large gamma."""
    return -sum(math.log1p(c / gamma) for c in offsets)


def closed_form_ksd_moments(d: int, gamma: float, mu_norm2: float) -> MomentSet:
    """Exact KSD-RBF moments under Q = N(mu, I_d), P = N(0, I_d).

    With m = ||mu||^2:
      D          = (g/(g+2))^(d/2) m
      sigma2_cond = (g^2/((1+g)(3+g)))^(d/2)
                    [ (2+g)^2/((1+g)(3+g)) m + (1 - B) m^2 ],
                    B = ((1+g)(3+g)/(2+g)^2)^(d/2)
      sigma2_full = (g/(4+g))^(d/2) T - (g/(2+g))^d m^2 with
                    T = c2 d^2 + c1 d + (2(2+g)/(g(4+g))) d m + 2 m + m^2
    where c2, c1 collect the exact quadratic/linear-in-d coefficients below
    (every coefficient is exact, not a leading-order statement).  Since
    (1+g)(3+g) = (2+g)^2 - 1 and g(4+g) = (2+g)^2 - 4, the 1 - (.)^(d/2)
    differences are computed with expm1/log1p to avoid cancellation.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if mu_norm2 < 0:
        raise ValueError(f"mu_norm2 must be >= 0, got {mu_norm2}")
    g = float(gamma)
    m = float(mu_norm2)
    dd = float(d)

    D = math.exp(0.5 * dd * _log_ratio(g, 2.0)) * m

    lead_cond = math.exp(0.5 * dd * (_log_ratio(g, 1.0) + _log_ratio(g, 3.0)))
    one_minus_b = -math.expm1(0.5 * dd * math.log1p(-1.0 / ((2.0 + g) ** 2)))
    s2_cond = lead_cond * ((2.0 + g) ** 2 / ((1.0 + g) * (3.0 + g)) * m + one_minus_b * m * m)

    c2 = (2.0 + g) ** 2 / (g * g * (4.0 + g) ** 2)
    c1 = (2.0 * (1.0 + g) ** 2 / (g * g * (2.0 + g) ** 2)
          + (2.0 + 4.0 * g + g * g) ** 2 / (g * (2.0 + g) ** 2 * (4.0 + g))
          + 2.0 * (g + 3.0) ** 2 / ((2.0 + g) ** 2 * (4.0 + g) ** 2))
    c_dm = 2.0 * (2.0 + g) / (g * (4.0 + g))
    one_minus_r = -math.expm1(0.5 * dd * math.log1p(-4.0 / ((2.0 + g) ** 2)))
    lead_full = math.exp(0.5 * dd * _log_ratio(g, 4.0))
    s2_full = lead_full * (c2 * dd * dd + c1 * dd + c_dm * dd * m + 2.0 * m + one_minus_r * m * m)

    return MomentSet(D, math.sqrt(max(s2_cond, 0.0)), math.sqrt(max(s2_full, 0.0)))


def closed_form_mmd_rbf_moments(d: int, gamma: float, mu_norm2: float) -> MomentSet:
    """Exact MMD-RBF moments under Q = N(mu, I_d), P = N(0, I_d).

    With m = ||mu||^2 and A_c = (g/(c+g))^(d/2):
      D          = 2 A_2 (1 - exp(-m/(2(2+g))))
      sigma2_cond = 2 A_1 A_3 (1 + e_a - 2 e_2) - 2 A_2^2 (1 - e_b)^2
      sigma2_full = 2 A_4 (1 + e_1) - 2 A_2^2 - 8 A_1 A_3 e_2
                    - 2 A_2^2 e_c + 8 A_2^2 e_b
    with e_a = exp(-m/(3+g)), e_b = exp(-m/(2(2+g))), e_c = exp(-m/(2+g)) =
    e_b^2, e_1 = exp(-m/(4+g)) and e_2 = exp(-(2+g)m/(2(1+g)(3+g))).  Both
    halves of sigma2_cond vanish identically at m = 0.  The same-variable
    cross term E[exp(-(||X-mu||^2+||X||^2)/(2(1+g)))] carries the e_2
    exponent in sigma2_cond exactly as it does in sigma2_full; writing it
    with any faster decay breaks sigma_cond <= sigma_full at large d/gamma
    and disagrees with the Monte-Carlo estimators by an order of magnitude.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if mu_norm2 < 0:
        raise ValueError(f"mu_norm2 must be >= 0, got {mu_norm2}")
    g = float(gamma)
    m = float(mu_norm2)
    dd = float(d)

    a2 = math.exp(0.5 * dd * _log_ratio(g, 2.0))
    D = 2.0 * a2 * (-math.expm1(-m / (2.0 * (2.0 + g))))

    a13 = math.exp(0.5 * dd * (_log_ratio(g, 1.0) + _log_ratio(g, 3.0)))
    a2sq = math.exp(dd * _log_ratio(g, 2.0))
    e_a = math.exp(-m / (3.0 + g))
    e_b = math.exp(-m / (2.0 * (2.0 + g)))
    e_c = math.exp(-m / (2.0 + g))
    e_2 = math.exp(-(2.0 + g) * m / (2.0 * (1.0 + g) * (3.0 + g)))
    one_minus_eb = -math.expm1(-m / (2.0 * (2.0 + g)))
    s2_cond = 2.0 * a13 * (1.0 + e_a - 2.0 * e_2) - 2.0 * a2sq * one_minus_eb ** 2

    a4 = math.exp(0.5 * dd * _log_ratio(g, 4.0))
    e_1 = math.exp(-m / (4.0 + g))
    s2_full = (2.0 * a4 * (1.0 + e_1) - 2.0 * a2sq - 8.0 * a13 * e_2
               - 2.0 * a2sq * e_c + 8.0 * a2sq * e_b)

    return MomentSet(D, math.sqrt(max(s2_cond, 0.0)), math.sqrt(max(s2_full, 0.0)))


def closed_form_linear_mmd_moments(mu: np.ndarray, cov: CovSpec) -> MomentSet:
    """Exact linear-kernel MMD moments under Q = N(mu, Sigma), P = N(0, Sigma):
    D = ||mu||^2, sigma2_cond = 2 mu^T Sigma mu, sigma2_full = 4 Tr(Sigma^2)
    + 4 mu^T Sigma mu.  O(d) for the structured covariance families.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != cov.d:
        raise ValueError(f"mu has length {mu.shape[0]}, cov has d={cov.d}")
    msm = float(mu @ cov_matvec(cov, mu))
    D = float(mu @ mu)
    s2_cond = 2.0 * msm
    s2_full = 4.0 * cov_trace_sq(cov) + 4.0 * msm
    return MomentSet(D, math.sqrt(max(s2_cond, 0.0)), math.sqrt(max(s2_full, 0.0)))


def conditional_mean_fn(spec: SummandSpec, model: MeanShiftModel, x_or_z) -> np.ndarray:
    """Closed-form conditional mean g = E[u(., Z')] under the mean-shift model.

    KSD (x in R^d):   (g/(g+1))^(d/2) exp(-||x-mu||^2/(2(g+1)))
                      ((2+g)/(1+g) mu.x - ||mu||^2/(1+g))
    MMD-RBF (z = (x, y) in R^2d, pass a (x, y) tuple or a length-2d vector):
                      (g/(1+g))^(d/2) [ e(x-mu) + e(y) - e(x) - e(y-mu) ],
                      e(v) = exp(-||v||^2/(2(1+g)))
    MMD-linear:       mu.(x - y), valid for any covariance.
    The RBF forms assume Sigma = I_d.  Inputs may carry leading batch axes.
    """
    mu = model.mu
    if isinstance(spec, KSD):
        if not isinstance(model.cov, Identity):
            raise NonIdentityCovariance("KSD conditional mean needs Sigma = I_d on the sampling model")
        if not isinstance(spec.target.cov, Identity):
            raise NonIdentityCovariance("KSD conditional mean needs an identity-covariance target")
        g = spec.gamma
        x = np.asarray(x_or_z, dtype=float)
        sq = np.sum((x - mu) ** 2, axis=-1)
        lead = math.exp(0.5 * model.d * _log_ratio(g, 1.0))
        bracket = (2.0 + g) / (1.0 + g) * (x @ mu) - (mu @ mu) / (1.0 + g)
        return lead * np.exp(-sq / (2.0 * (g + 1.0))) * bracket
    if isinstance(spec, MMD):
        if isinstance(spec.kernel, Linear):
            if isinstance(x_or_z, (tuple, list)):
                x, y = (np.asarray(v, dtype=float) for v in x_or_z)
            else:
                z = np.asarray(x_or_z, dtype=float)
                x, y = z[..., : model.d], z[..., model.d:]
            return (x - y) @ mu
        if not isinstance(model.cov, Identity):
            raise NonIdentityCovariance("MMD-RBF conditional mean needs Sigma = I_d")
        g = _rbf_gamma(spec.kernel)
        if isinstance(x_or_z, (tuple, list)):
            x, y = (np.asarray(v, dtype=float) for v in x_or_z)
        else:
            z = np.asarray(x_or_z, dtype=float)
            x, y = z[..., : model.d], z[..., model.d:]
        c = 2.0 * (1.0 + g)
        lead = math.exp(0.5 * model.d * _log_ratio(g, 1.0))
        val = (np.exp(-np.sum((x - mu) ** 2, axis=-1) / c)
               + np.exp(-np.sum(y * y, axis=-1) / c)
               - np.exp(-np.sum(x * x, axis=-1) / c)
               - np.exp(-np.sum((y - mu) ** 2, axis=-1) / c))
        return lead * val
    raise UnsupportedSummand(f"no closed-form conditional mean for {type(spec).__name__}")


# ---------------------------------------------------------------------------
# derived quantities


def rho_and_sigma_max(ms: MomentSet, n: int) -> Tuple[float, float, Optional[float]]:
    """rho_d = sigma_full/sigma_cond (inf when sigma_cond = 0), the dominating
    scale sigma_max = max(sigma_full, sqrt(n-1) sigma_cond), and the analogous
    M_{max;3} when both third moments are present."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    rho = math.inf if ms.sigma_cond == 0.0 else ms.sigma_full / ms.sigma_cond
    root = math.sqrt(n - 1.0)
    sigma_max = max(ms.sigma_full, root * ms.sigma_cond)
    m_max = None
    if ms.m_cond_3 is not None and ms.m_full_3 is not None:
        m_max = max(ms.m_full_3, root * ms.m_cond_3)
    return rho, sigma_max, m_max


def assumption1_check(ms: MomentSet, C: float) -> RatioCheck:
    """Moment-ratio check: M_{cond;3}/sigma_cond and M_{full;3}/sigma_full
    against the uniform bound C."""
    if ms.m_cond_3 is None or ms.m_full_3 is None:
        raise ValueError("moment set has no third-moment fields (closed-form sets omit them)")
    if ms.sigma_cond == 0.0:
        raise DegenerateDenominator("sigma_cond = 0: moment ratio undefined")
    if ms.sigma_full == 0.0:
        raise DegenerateDenominator("sigma_full = 0: moment ratio undefined")
    ratio_cond = ms.m_cond_3 / ms.sigma_cond
    ratio_full = ms.m_full_3 / ms.sigma_full
    return RatioCheck(ratio_cond, ratio_full, bound_ok=(ratio_cond <= C and ratio_full <= C))


def berry_esseen_bound(ms: MomentSet, n: int, nu: int = 3) -> float:
    """Gaussian-approximation error bound for the studentised statistic:

        6.1 M_{cond;3}^3 / (n^(1/2) sigma_cond^3)
        + (1 + sqrt(2)) rho_d / (2 sqrt(n-1)).

    Values above 1 are vacuous (the degenerate regime).  When the third
    moment is unavailable the first term uses M_{cond;3} = sigma_cond, a
    lower bound on the true ratio.
    """
    if nu != 3:
        raise ValueError(f"only nu = 3 is supported, got nu={nu}")
    if ms.sigma_cond == 0.0:
        raise DegenerateDenominator("sigma_cond = 0: Gaussian bound undefined")
    ratio = 1.0 if ms.m_cond_3 is None else ms.m_cond_3 / ms.sigma_cond
    rho = ms.sigma_full / ms.sigma_cond
    return (6.1 * ratio ** 3 / math.sqrt(n)
            + (1.0 + math.sqrt(2.0)) * rho / (2.0 * math.sqrt(n - 1.0)))


def variance_proxy(ms: MomentSet, n: int) -> float:
    """4 sigma2_cond/n + 2 sigma2_full/(n(n-1)): the non-degenerate-limit
    variance plus the degenerate-limit variance, used to scale threshold
    grids so they bracket the bulk of D_n in either regime."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return (4.0 * ms.sigma_cond ** 2 / n
            + 2.0 * ms.sigma_full ** 2 / (n * (n - 1.0)))
