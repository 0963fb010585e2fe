"""RBF and linear kernels, Stein-operator derivatives, and bandwidth rules.

Squared distances are accumulated directly (sum of coordinate-wise squared
differences) rather than through the ||x||^2 + ||x'||^2 - 2 x^T x' expansion,
which loses accuracy for nearby points.  Only the very large blocked products
used by the Monte-Carlo moment estimators (work > 2^30 multiply-adds, where
Gaussian clouds keep points far apart and the expansion's ~1e-14 relative
error is irrelevant) switch to the clamped expansion; the switch depends on
shapes only, so outputs are deterministic within a build.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateBandwidth, DegenerateBandwidthWarning

_EXPANSION_WORK_THRESHOLD = 1 << 30
_MEDIAN_MAX_POINTS = 5000


@dataclass(frozen=True)
class Fixed:
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("fixed bandwidth must be strictly positive")


@dataclass(frozen=True)
class MedianHeuristic:
    pass


@dataclass(frozen=True)
class PowerOfD:
    """gamma = coef * d**exponent."""

    coef: float
    exponent: float

    def __post_init__(self):
        if self.coef <= 0:
            raise ValueError("power-of-d coef must be strictly positive")


BandwidthRule = Union[Fixed, MedianHeuristic, PowerOfD]


@dataclass(frozen=True)
class RBF:
    bandwidth: BandwidthRule


@dataclass(frozen=True)
class Linear:
    pass


KernelSpec = Union[RBF, Linear]


def sqdist(x: np.ndarray, y: np.ndarray) -> float:
    """One-pass accumulated squared distance between two vectors."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.dot(diff, diff))


def pairwise_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs squared distances between rows of a and rows of b.

    Direct accumulation below the work threshold; clamped expansion above it
    (see module docstring for the error analysis).
    """
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    work = a.shape[0] * b.shape[0] * a.shape[1]
    if work <= _EXPANSION_WORK_THRESHOLD:
        return cdist(a, b, "sqeuclidean")
    sq_a = np.einsum("ij,ij->i", a, a)
    sq_b = np.einsum("ij,ij->i", b, b)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def rbf_eval(gamma: float, x: np.ndarray, x2: np.ndarray) -> float:
    """kappa(x, x') = exp(-||x - x'||^2 / (2 gamma))."""
    if gamma <= 0:
        raise ValueError("gamma must be strictly positive")
    return float(np.exp(-sqdist(x, x2) / (2.0 * gamma)))


def rbf_grads(gamma: float, x: np.ndarray, x2: np.ndarray):
    """Gradients of the RBF kernel in each argument plus the mixed-derivative trace.

    Returns (grad_1 kappa, grad_2 kappa, Tr grad_1 grad_2 kappa) where
    grad_1 kappa = -kappa (x - x')/gamma, grad_2 kappa = +kappa (x - x')/gamma,
    Tr grad_1 grad_2 kappa = kappa (d/gamma - ||x - x'||^2 / gamma^2).
    """
    if gamma <= 0:
        raise ValueError("gamma must be strictly positive")
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    diff = x - x2
    d2 = float(np.dot(diff, diff))
    k = np.exp(-d2 / (2.0 * gamma))
    g1 = -k * diff / gamma
    g2 = k * diff / gamma
    trace = k * (x.shape[-1] / gamma - d2 / (gamma * gamma))
    return g1, g2, trace


def median_heuristic(points: np.ndarray) -> float:
    """Median of the m(m-1)/2 pairwise squared distances.

    Even pair counts take the mean of the two middle order statistics.  All
    points identical returns 0.0 with a DegenerateBandwidthWarning; the caller
    must reject gamma = 0 for an RBF kernel.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[0]
    if m < 2:
        raise ValueError("median heuristic needs at least 2 points")
    if m > _MEDIAN_MAX_POINTS:
        raise ValueError(f"median heuristic supports at most {_MEDIAN_MAX_POINTS} points, got {m}")
    d2 = pdist(points, "sqeuclidean")
    gamma = float(np.median(d2))
    if gamma == 0.0:
        warnings.warn("all pairwise distances are zero; bandwidth is degenerate",
                      DegenerateBandwidthWarning)
    return gamma


def resolve_bandwidth(rule: BandwidthRule, d: int,
                      pooled_points: Optional[np.ndarray] = None) -> float:
    """Resolve a bandwidth rule to a concrete gamma > 0.

    MedianHeuristic requires the caller-supplied pooled point set (X for KSD,
    X union Y for MMD) and raises DegenerateBandwidth when the median is 0.
    """
    if isinstance(rule, Fixed):
        return float(rule.gamma)
    if isinstance(rule, PowerOfD):
        return float(rule.coef * float(d) ** rule.exponent)
    if isinstance(rule, MedianHeuristic):
        if pooled_points is None or np.asarray(pooled_points).shape[0] < 2:
            raise ValueError("median heuristic needs >= 2 pooled points")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateBandwidthWarning)
            gamma = median_heuristic(pooled_points)
        if gamma == 0.0:
            raise DegenerateBandwidth("median-heuristic bandwidth is 0 (all points identical)")
        return gamma
    raise TypeError(f"unknown bandwidth rule {rule!r}")
