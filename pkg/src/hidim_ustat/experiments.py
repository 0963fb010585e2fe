"""Monte-Carlo harness: tail curves with seed-wise confidence bands,
Kolmogorov-distance sweeps over d or the bandwidth, regime diagnosis, and
moment-ratio sweeps.

Replicates are embarrassingly parallel: replicate (s, r) of sweep value j
draws from the dedicated stream (base_seed, j*seeds + s, r), so results are
identical for any worker count (HIDIM_USTAT_THREADS caps threads, speed
only).  Seed-level aggregation is a deterministic fold in seed order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateDenominator
from .kernels import BandwidthRule, Fixed, Linear, MedianHeuristic, RBF, resolve_bandwidth
from .limits import (LimitSpec, chisq_matched_limit, gamma_matched_limit,
                     kolmogorov_distance, limit_cdf, limit_sample, linear_mmd_exact_limit,
                     nondegenerate_limit)
from .model import CovSpec, Diagonal, Identity, MeanShiftModel, RngStream, Spiked, sample_with
from .moments import (MomentSet, assumption1_check, closed_form_ksd_moments,
                      closed_form_linear_mmd_moments, closed_form_mmd_rbf_moments,
                      empirical_moments, rho_and_sigma_max, variance_proxy)
from .ustat import KSD, MMD, PairedSample, SummandSpec, u_statistic

_THREADS_ENV = "HIDIM_USTAT_THREADS"
_LIMIT_NAMES = ("gauss", "gamma", "chisq1", "wchisq_exact")
_STATS = ("ksd_rbf", "mmd_rbf", "mmd_linear")
_WCHISQ_SURVIVAL_REPS = 200_000


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class AutoGrid:
    """Threshold grid spanning D +/- span * sqrt(variance proxy), `points` points."""

    span: float = 4.0
    points: int = 101

    def __post_init__(self):
        if self.span <= 0 or self.points < 2:
            raise ValueError("grid: span must be > 0 and points >= 2")


@dataclass(frozen=True)
class FixedGrid:
    lo: float
    hi: float
    points: int = 101

    def __post_init__(self):
        if not self.hi >= self.lo or self.points < 2:
            raise ValueError("grid: need hi >= lo and points >= 2")


GridRule = Union[AutoGrid, FixedGrid]


@dataclass(frozen=True)
class CovTemplate:
    """Dimension-free covariance pattern, instantiated per swept d."""

    kind: str = "identity"
    sigma2: float = 1.0
    rho: float = 0.0
    entries: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in ("identity", "spiked", "diagonal"):
            raise ValueError(f"cov: unknown kind {self.kind!r}")
        if self.kind == "diagonal" and not self.entries:
            raise ValueError("cov: diagonal kind needs entries")

    def instantiate(self, d: int) -> CovSpec:
        if self.kind == "identity":
            return Identity(d)
        if self.kind == "spiked":
            return Spiked(sigma2=self.sigma2, rho=self.rho, d=d)
        if len(self.entries) != d:
            raise ValueError(f"cov: diagonal entries have length {len(self.entries)}, d={d}")
        return Diagonal(entries=tuple(self.entries))


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte-Carlo experiment: summand family, mean-shift model pattern,
    sample size, seed/replicate counts, threshold grid and candidate limits."""

    stat: str = "ksd_rbf"
    d: int = 2
    n: int = 50
    gamma: Optional[BandwidthRule] = None
    mu_first: float = 0.0
    mu_second: float = 0.0
    mu: Optional[Tuple[float, ...]] = None
    cov: CovTemplate = field(default_factory=CovTemplate)
    seeds: int = 10
    reps_per_seed: int = 200
    grid: GridRule = field(default_factory=AutoGrid)
    limits: Tuple[str, ...] = ("gauss", "gamma")
    base_seed: int = 0
    freeze_median: bool = False
    n_mc_moments: Optional[int] = None
    custom_spec: Optional[SummandSpec] = None

    def __post_init__(self):
        if self.custom_spec is None and self.stat not in _STATS:
            raise ValueError(f"stat: unknown statistic {self.stat!r}")
        if self.d < 1:
            raise ValueError(f"d: must be >= 1, got {self.d}")
        if self.n < 2:
            raise ValueError(f"n: must be >= 2, got {self.n}")
        if self.seeds < 1:
            raise ValueError(f"seeds: must be >= 1, got {self.seeds}")
        if self.reps_per_seed < 2:
            raise ValueError(f"reps_per_seed: must be >= 2, got {self.reps_per_seed}")
        if self.custom_spec is None and self.stat in ("ksd_rbf", "mmd_rbf") and self.gamma is None:
            raise ValueError(f"gamma: bandwidth rule required for stat {self.stat}")
        for name in self.limits:
            if name not in _LIMIT_NAMES:
                raise ValueError(f"limits: unknown limit {name!r}")
        if "wchisq_exact" in self.limits and self.stat != "mmd_linear":
            raise ValueError("limits: wchisq_exact requires stat mmd_linear")
        if self.mu is not None and len(self.mu) != self.d:
            raise ValueError(f"mu: explicit vector has length {len(self.mu)}, d={self.d}")
        if self.mu_second != 0.0 and self.d < 2:
            raise ValueError("mu_second: needs d >= 2")
        if self.n_mc_moments is not None and self.n_mc_moments < 10:
            raise ValueError(f"n_mc_moments: must be >= 10, got {self.n_mc_moments}")


def build_model(cfg: ExperimentConfig, d: Optional[int] = None) -> MeanShiftModel:
    """Instantiate the mean-shift model pattern at dimension d (default cfg.d)."""
    d = cfg.d if d is None else d
    if cfg.mu is not None:
        if len(cfg.mu) != d:
            raise ValueError(f"mu: explicit vector has length {len(cfg.mu)}, d={d}")
        mu = np.asarray(cfg.mu, dtype=float)
    else:
        mu = np.zeros(d)
        mu[0] = cfg.mu_first
        if cfg.mu_second != 0.0:
            if d < 2:
                raise ValueError("mu_second: needs d >= 2")
            mu[1] = cfg.mu_second
    return MeanShiftModel(d=d, mu=mu, cov=cfg.cov.instantiate(d))


def _two_sample(cfg: ExperimentConfig) -> bool:
    # custom stubs get a one-sample draw; MMD families need Y ~ P
    return cfg.custom_spec is None and cfg.stat in ("mmd_rbf", "mmd_linear")


def _fixed_summand(cfg: ExperimentConfig, model: MeanShiftModel, gamma: Optional[float]) -> SummandSpec:
    """Concrete summand at a resolved bandwidth."""
    if cfg.custom_spec is not None:
        return cfg.custom_spec
    if cfg.stat == "mmd_linear":
        return MMD(Linear())
    if gamma is None:
        raise ValueError("gamma: no resolved bandwidth")
    if cfg.stat == "ksd_rbf":
        return KSD(gamma=gamma, target=model.null())
    return MMD(RBF(Fixed(gamma)))


def _resolve_gamma(cfg: ExperimentConfig, model: MeanShiftModel, data: PairedSample,
                   gamma_override: Optional[float]) -> Optional[float]:
    if cfg.custom_spec is not None or cfg.stat == "mmd_linear":
        return None
    if gamma_override is not None:
        return float(gamma_override)
    rule = cfg.gamma
    pooled = None
    if isinstance(rule, MedianHeuristic):
        pooled = data.X if data.Y is None else np.vstack([data.X, data.Y])
    return resolve_bandwidth(rule, model.d, pooled)


def _n_workers(n_tasks: int) -> int:
    raw = os.environ.get(_THREADS_ENV, "")
    try:
        w = int(raw) if raw else 1
    except ValueError:
        w = 1
    return max(1, min(w, n_tasks))


def _indexed_map(fn, tasks):
    w = _n_workers(len(tasks))
    if w <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, tasks))


def collect_dn_samples(cfg: ExperimentConfig, *, d: Optional[int] = None, n: Optional[int] = None,
                       gamma_override: Optional[float] = None, seed_offset: int = 0):
    """All replicate statistics for one experiment cell.

    Returns (dn, gammas): (seeds, reps_per_seed) arrays of the statistic and
    the bandwidth resolved per replicate (nan where no bandwidth applies).
    Replicate (s, r) uses stream (base_seed, seed_offset + s, r); a median
    bandwidth is re-resolved from that replicate's own sample unless
    freeze_median pins the value resolved from replicate (0, 0).
    """
    model = build_model(cfg, d)
    n = cfg.n if n is None else n
    if n < 2:
        raise ValueError(f"n: must be >= 2, got {n}")
    two = _two_sample(cfg)

    def draw(s: int, r: int) -> PairedSample:
        rng = RngStream(cfg.base_seed, seed_offset + s, r).generator()
        x = sample_with(model, n, rng)
        y = sample_with(model.null(), n, rng) if two else None
        return PairedSample(x, y)

    frozen_gamma = gamma_override
    if (frozen_gamma is None and cfg.freeze_median and cfg.custom_spec is None
            and isinstance(cfg.gamma, MedianHeuristic)):
        frozen_gamma = _resolve_gamma(cfg, model, draw(0, 0), None)

    def one(task):
        s, r = task
        data = draw(s, r)
        g = _resolve_gamma(cfg, model, data, frozen_gamma)
        return u_statistic(_fixed_summand(cfg, model, g), data), (math.nan if g is None else g)

    tasks = [(s, r) for s in range(cfg.seeds) for r in range(cfg.reps_per_seed)]
    out = _indexed_map(one, tasks)
    dn = np.array([v for v, _ in out]).reshape(cfg.seeds, cfg.reps_per_seed)
    gammas = np.array([g for _, g in out]).reshape(cfg.seeds, cfg.reps_per_seed)
    return dn, gammas


def _reference_gamma(gammas: np.ndarray) -> Optional[float]:
    vals = gammas[np.isfinite(gammas)]
    return float(np.median(vals)) if vals.size else None


def _theory_moments(cfg: ExperimentConfig, model: MeanShiftModel, n: int,
                    ref_gamma: Optional[float], moments_seed_index: int) -> MomentSet:
    """Closed-form moments when available, else MC moments at the reference
    bandwidth with n_mc = max(4000, 4n) on a dedicated stream."""
    mu_norm2 = float(model.mu @ model.mu)
    identity_cov = isinstance(model.cov, Identity)
    if cfg.custom_spec is None:
        if cfg.stat == "mmd_linear":
            return closed_form_linear_mmd_moments(model.mu, model.cov)
        if identity_cov and ref_gamma is not None:
            if cfg.stat == "ksd_rbf":
                return closed_form_ksd_moments(model.d, ref_gamma, mu_norm2)
            return closed_form_mmd_rbf_moments(model.d, ref_gamma, mu_norm2)
    n_mc = cfg.n_mc_moments if cfg.n_mc_moments is not None else max(4000, 4 * n)
    spec = _fixed_summand(cfg, model, ref_gamma)
    return empirical_moments(spec, model, n_mc, RngStream(cfg.base_seed, moments_seed_index, 0))


def _limit_specs(cfg: ExperimentConfig, model: MeanShiftModel, ms: MomentSet, n: int,
                 names: Sequence[str]) -> Dict[str, LimitSpec]:
    out: Dict[str, LimitSpec] = {}
    for name in names:
        if name == "gauss":
            out[name] = nondegenerate_limit(ms, n)
        elif name == "gamma":
            out[name] = gamma_matched_limit(ms, n)
        elif name == "chisq1":
            out[name] = chisq_matched_limit(ms, n)
        elif name == "wchisq_exact":
            out[name] = linear_mmd_exact_limit(model.mu, model.cov, n)
        else:
            raise ValueError(f"limits: unknown limit {name!r}")
    return out


# ---------------------------------------------------------------------------
# tail curves


@dataclass(frozen=True)
class TailCurve:
    """Survival curves on a shared threshold grid: across-seed empirical mean
    with a 95% normal-approximation band, plus one theoretical curve per
    requested limit.  dn holds the raw (seeds, reps) replicate statistics."""

    thresholds: np.ndarray
    emp_mean: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    curves: Dict[str, np.ndarray]
    limit_specs: Dict[str, LimitSpec]
    moments: MomentSet
    ref_gamma: Optional[float]
    dn: np.ndarray


def _survival_from_samples(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    s = np.sort(samples)
    return 1.0 - np.searchsorted(s, grid, side="right") / s.size


def _resolve_grid(cfg: ExperimentConfig, ms: MomentSet, n: int, dn: np.ndarray) -> np.ndarray:
    if isinstance(cfg.grid, FixedGrid):
        return np.linspace(cfg.grid.lo, cfg.grid.hi, cfg.grid.points)
    half = cfg.grid.span * math.sqrt(variance_proxy(ms, n))
    grid = np.linspace(ms.D - half, ms.D + half, cfg.grid.points)
    inside = np.mean((dn >= grid[0]) & (dn <= grid[-1]))
    if inside < 0.99:
        raise RuntimeError(
            f"auto threshold grid brackets only {inside:.1%} of the empirical mass; "
            "the theoretical moments disagree with the simulated statistic")
    return grid


def run_tail_curve(cfg: ExperimentConfig) -> TailCurve:
    """Empirical survival of D_n across seeds on a shared grid, with the
    requested theoretical limit curves driven by closed-form or MC moments."""
    model = build_model(cfg)
    dn, gammas = collect_dn_samples(cfg)
    ref_gamma = _reference_gamma(gammas)
    ms = _theory_moments(cfg, model, cfg.n, ref_gamma, moments_seed_index=cfg.seeds)
    grid = _resolve_grid(cfg, ms, cfg.n, dn)

    per_seed = np.stack([_survival_from_samples(dn[s], grid) for s in range(cfg.seeds)])
    emp_mean = per_seed.mean(axis=0)
    if cfg.seeds > 1:
        half = 1.96 * per_seed.std(axis=0, ddof=1) / math.sqrt(cfg.seeds)
    else:
        half = np.zeros_like(emp_mean)
    ci_lo = np.clip(emp_mean - half, 0.0, 1.0)
    ci_hi = np.clip(emp_mean + half, 0.0, 1.0)

    specs = _limit_specs(cfg, model, ms, cfg.n, cfg.limits)
    curves: Dict[str, np.ndarray] = {}
    for name, spec in specs.items():
        if name == "wchisq_exact":
            draws = limit_sample(spec, _WCHISQ_SURVIVAL_REPS,
                                 RngStream(cfg.base_seed, cfg.seeds + 1, 0))
            curves[name] = _survival_from_samples(draws, grid)
        else:
            curves[name] = 1.0 - limit_cdf(spec, grid)
    return TailCurve(thresholds=grid, emp_mean=emp_mean, ci_lo=ci_lo, ci_hi=ci_hi,
                     curves=curves, limit_specs=specs, moments=ms, ref_gamma=ref_gamma, dn=dn)


# ---------------------------------------------------------------------------
# regime diagnosis and order-of-magnitude predictions


class Diagnosis(NamedTuple):
    rho_d: float
    sqrt_n_minus_1: float
    regime: str
    predicted_limit: str


def diagnose(ms: MomentSet, n: int) -> Diagnosis:
    """Classify the moment ratio rho_d against sqrt(n-1): more than 3x above
    is degenerate-dominant, more than 3x below is gaussian-dominant."""
    if n < 2:
        raise ValueError(f"n: must be >= 2, got {n}")
    rho, _, _ = rho_and_sigma_max(ms, n)
    root = math.sqrt(n - 1)
    if rho > 3.0 * root:
        return Diagnosis(rho, root, "degenerate_dominant", "gamma_matched_limit")
    if rho < root / 3.0:
        return Diagnosis(rho, root, "gaussian_dominant", "nondegenerate_limit")
    return Diagnosis(rho, root, "boundary", "unk_quadratic_form")


def predict_rho_order(stat: str, d: float, gamma: float, mu_norm: float) -> Tuple[str, float]:
    """Order-of-magnitude prediction of rho_d in the identity-covariance
    mean-shift setup, with every implicit constant set to 1.

    The bandwidth regime compares gamma to sqrt(d) (small < 1/3, critical in
    [1/3, 3], large > 3); the MMD summand additionally compares gamma to
    ||mu||^2 (a bandwidth below the squared signal is signal-dominated; ties
    go to the bandwidth-dominated branch).
    """
    if stat not in ("ksd_rbf", "mmd_rbf"):
        raise ValueError(f"stat: unknown statistic {stat!r}")
    if d <= 0 or gamma <= 0 or mu_norm <= 0:
        raise ValueError("d, gamma, mu_norm must all be > 0")
    m = float(mu_norm)
    m2 = m * m
    root = math.sqrt(d)
    ratio = gamma / root

    def expo() -> float:
        try:
            return math.exp(3.0 * d / (4.0 * gamma * gamma))
        except OverflowError:
            return math.inf

    if stat == "ksd_rbf":
        if ratio < 1.0 / 3.0:
            return "small_bandwidth", expo() * (d / (gamma * m2) + root / (math.sqrt(gamma) * m) + 1.0)
        if ratio > 3.0:
            return "large_bandwidth", (root * (1.0 + m / math.sqrt(gamma))
                                       / (m * (1.0 + root * m / gamma)) + 1.0)
        return "critical_bandwidth", root / m2 + math.sqrt(root) / m + 1.0

    if gamma < m2:
        return "signal_dominated", expo()
    if ratio < 1.0 / 3.0:
        return "small_bandwidth", (gamma / m2) * expo()
    if ratio > 3.0:
        return "large_bandwidth", (m + root) / (m + root * m2 / gamma)
    return "critical_bandwidth", root / m2


# ---------------------------------------------------------------------------
# Kolmogorov-distance sweeps


@dataclass(frozen=True)
class SweepRow:
    swept_param: str
    value: float
    gamma: Optional[float]
    ks: Dict[str, Tuple[float, float]]
    rho_d: float
    regime: str


@dataclass(frozen=True)
class SweepResult:
    rows: Tuple[SweepRow, ...]


def _sweep_n(n0: int, v0: float, v: float, n_rule: str) -> int:
    if n_rule == "fixed":
        return n0
    if n_rule == "sqrt_d":
        return max(2, round(n0 * math.sqrt(v / v0)))
    if n_rule == "d2":
        return max(2, round(n0 * (v / v0) ** 2))
    raise ValueError(f"n_rule: unknown rule {n_rule!r}")


def run_kdist_sweep(cfg: ExperimentConfig, vary: str, values: Sequence[float],
                    n_rule: str = "fixed") -> SweepResult:
    """Per swept value: mean and across-seed SD of the per-seed Kolmogorov
    distance of D_n to each requested limit, plus rho_d and the regime.

    vary is "d" (n then follows n_rule, proportionality anchored at the first
    value) or "gamma" (fixed d, bandwidth overridden per value).
    """
    if vary not in ("d", "gamma"):
        raise ValueError(f"vary: must be 'd' or 'gamma', got {vary!r}")
    if len(values) < 2:
        raise ValueError(f"vary: need >= 2 sweep values, got {len(values)}")
    names = [x for x in cfg.limits if x != "wchisq_exact"]
    rows = []
    for j, v in enumerate(values):
        d_v = int(v) if vary == "d" else cfg.d
        if vary == "d" and d_v != v:
            raise ValueError(f"vary: d values must be integers, got {v}")
        n_v = _sweep_n(cfg.n, values[0], v, n_rule) if vary == "d" else cfg.n
        g_ov = float(v) if vary == "gamma" else None
        model = build_model(cfg, d_v)
        dn, gammas = collect_dn_samples(cfg, d=d_v, n=n_v, gamma_override=g_ov,
                                        seed_offset=j * cfg.seeds)
        ref_gamma = _reference_gamma(gammas)
        ms = _theory_moments(cfg, model, n_v, ref_gamma,
                             moments_seed_index=cfg.seeds * len(values) + j)
        specs = _limit_specs(cfg, model, ms, n_v, names)
        ks: Dict[str, Tuple[float, float]] = {}
        for name, spec in specs.items():
            per_seed = np.array([kolmogorov_distance(np.sort(dn[s]), spec)
                                 for s in range(cfg.seeds)])
            sd = float(per_seed.std(ddof=1)) if cfg.seeds > 1 else 0.0
            ks[name] = (float(per_seed.mean()), sd)
        diag = diagnose(ms, n_v)
        rows.append(SweepRow(swept_param=vary, value=float(v), gamma=ref_gamma,
                             ks=ks, rho_d=diag.rho_d, regime=diag.regime))
    return SweepResult(rows=tuple(rows))


# ---------------------------------------------------------------------------
# moment-ratio sweeps


@dataclass(frozen=True)
class RatioRow:
    d: int
    ratio_cond: Optional[float]
    ratio_full: Optional[float]


def run_moment_ratio_sweep(cfg: ExperimentConfig, d_values: Sequence[int]) -> Tuple[RatioRow, ...]:
    """Across-seed means of the third-moment ratios M_{cond;3}/sigma_cond and
    M_{full;3}/sigma_full from MC moments (n_mc defaults to 4000) at each d.
    A degenerate scale on some seed leaves that ratio out; a row where every
    seed is degenerate reports null."""
    n_mc = cfg.n_mc_moments if cfg.n_mc_moments is not None else 4000
    rows = []
    for j, d in enumerate(d_values):
        model = build_model(cfg, int(d))
        conds, fulls = [], []
        for s in range(cfg.seeds):
            base_index = j * cfg.seeds + s
            g = None
            if cfg.custom_spec is None and cfg.stat != "mmd_linear":
                rule = cfg.gamma
                pooled = None
                if isinstance(rule, MedianHeuristic):
                    rng = RngStream(cfg.base_seed, base_index, 0).generator()
                    pooled = sample_with(model, min(n_mc, 2000), rng)
                    if _two_sample(cfg):
                        pooled = np.vstack([pooled, sample_with(model.null(), min(n_mc, 2000), rng)])
                g = resolve_bandwidth(rule, model.d, pooled)
            spec = _fixed_summand(cfg, model, g)
            ms = empirical_moments(spec, model, n_mc, RngStream(cfg.base_seed, base_index, 1))
            try:
                rc = assumption1_check(ms, C=math.inf)
                conds.append(rc.ratio_cond)
                fulls.append(rc.ratio_full)
            except DegenerateDenominator:
                if ms.sigma_cond > 0:
                    conds.append(ms.m_cond_3 / ms.sigma_cond)
                if ms.sigma_full > 0:
                    fulls.append(ms.m_full_3 / ms.sigma_full)
        rows.append(RatioRow(d=int(d),
                             ratio_cond=float(np.mean(conds)) if conds else None,
                             ratio_full=float(np.mean(fulls)) if fulls else None))
    return tuple(rows)


# ---------------------------------------------------------------------------
# CSV emitters (schemas are the package's external interface)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_tailcurve_csv(tc: TailCurve, path) -> None:
    cols = {"gauss": "gauss", "gamma": "gamma", "chisq1": "chisq1", "wchisq_exact": "wchisq"}
    with open(path, "w", newline="") as f:
        f.write("threshold,emp_mean,emp_ci_lo,emp_ci_hi,gauss,gamma,chisq1,wchisq\n")
        for i in range(tc.thresholds.size):
            row = [_cell(float(tc.thresholds[i])), _cell(float(tc.emp_mean[i])),
                   _cell(float(tc.ci_lo[i])), _cell(float(tc.ci_hi[i]))]
            for name in cols:
                row.append(_cell(float(tc.curves[name][i])) if name in tc.curves else "")
            f.write(",".join(row) + "\n")


def write_sweep_csv(res: SweepResult, path) -> None:
    with open(path, "w", newline="") as f:
        f.write("swept_param,value,gamma,ks_gauss,ks_gauss_sd,ks_gamma,ks_gamma_sd,"
                "ks_chisq1,ks_chisq1_sd,rho_d,regime\n")
        for row in res.rows:
            cells = [row.swept_param, _cell(row.value), _cell(row.gamma)]
            for name in ("gauss", "gamma", "chisq1"):
                if name in row.ks:
                    cells.extend([_cell(row.ks[name][0]), _cell(row.ks[name][1])])
                else:
                    cells.extend(["", ""])
            cells.extend([_cell(row.rho_d), row.regime])
            f.write(",".join(cells) + "\n")


def write_ratios_csv(rows: Sequence[RatioRow], path) -> None:
    with open(path, "w", newline="") as f:
        f.write("d,ratio_cond,ratio_full\n")
        for r in rows:
            f.write(",".join([str(r.d), _cell(r.ratio_cond), _cell(r.ratio_full)]) + "\n")
