"""Gaussian mean-shift data model, structured covariances, and seeded RNG streams.

The data model is the pair Q = N(mu, Sigma) vs P = N(0, Sigma).  Covariances are
restricted to three structured families so sampling and score evaluation stay
O(d) per vector -- no d x d factorization is ever materialized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import TargetNotCentered

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Identity:
    """Sigma = I_d."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("Identity covariance needs d >= 1")


@dataclass(frozen=True)
class Diagonal:
    """Sigma = diag(entries), entries strictly positive."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(float(v) for v in self.entries))
        if any(v <= 0 for v in self.entries):
            raise ValueError("Diagonal covariance entries must be strictly positive")

    @property
    def d(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Spiked:
    """Sigma = sigma2 * I_d + rho * 11^T (rank-one spike along the all-ones direction)."""

    sigma2: float
    rho: float
    d: int

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("Spiked sigma2 must be strictly positive")
        if self.rho < 0:
            raise ValueError("Spiked rho must be non-negative")


CovSpec = Union[Identity, Diagonal, Spiked]


def cov_eigenvalues(cov: CovSpec) -> np.ndarray:
    """Eigenvalues of Sigma in closed form, descending."""
    if isinstance(cov, Identity):
        return np.ones(cov.d)
    if isinstance(cov, Diagonal):
        return np.sort(np.asarray(cov.entries))[::-1]
    if isinstance(cov, Spiked):
        out = np.full(cov.d, cov.sigma2)
        out[0] = cov.sigma2 + cov.rho * cov.d
        return out
    raise TypeError(f"unknown covariance spec {cov!r}")


def cov_matvec(cov: CovSpec, x: np.ndarray) -> np.ndarray:
    """Sigma @ x without forming Sigma."""
    if isinstance(cov, Identity):
        return np.asarray(x, dtype=float).copy()
    if isinstance(cov, Diagonal):
        return np.asarray(cov.entries) * x
    if isinstance(cov, Spiked):
        return cov.sigma2 * x + cov.rho * np.sum(x)
    raise TypeError(f"unknown covariance spec {cov!r}")


def cov_trace_sq(cov: CovSpec) -> float:
    """Tr(Sigma^2) in O(d)."""
    if isinstance(cov, Identity):
        return float(cov.d)
    if isinstance(cov, Diagonal):
        return float(np.sum(np.square(cov.entries)))
    if isinstance(cov, Spiked):
        # eigenvalues: sigma2 + rho d (once), sigma2 (d-1 times)
        top = cov.sigma2 + cov.rho * cov.d
        return float(top * top + (cov.d - 1) * cov.sigma2 * cov.sigma2)
    raise TypeError(f"unknown covariance spec {cov!r}")


@dataclass(frozen=True)
class MeanShiftModel:
    """The pair (Q, P) = (N(mu, Sigma), N(0, Sigma))."""

    d: int
    mu: np.ndarray
    cov: CovSpec

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        object.__setattr__(self, "mu", mu)
        if mu.shape[0] != self.d:
            raise ValueError(f"mu has length {mu.shape[0]}, expected d={self.d}")
        cd = self.cov.d
        if cd != self.d:
            raise ValueError(f"cov dimension {cd} != d={self.d}")

    def null(self) -> "MeanShiftModel":
        """The target P (same covariance, zero mean)."""
        return MeanShiftModel(self.d, np.zeros(self.d), self.cov)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """One reproducible stream, keyed by (base_seed, seed_index, replicate_index).

    The triple is folded through a splitmix64 avalanche into the key of a Philox
    counter-based generator, so distinct triples give independent streams and
    the same triple replays bit-identically within one build.
    """

    base_seed: int
    seed_index: int = 0
    replicate_index: int = 0

    def key(self) -> int:
        acc = _splitmix64(self.base_seed & _MASK64)
        acc = _splitmix64(acc ^ (self.seed_index & _MASK64))
        acc = _splitmix64(acc ^ (self.replicate_index & _MASK64))
        return acc

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))


def sample(model: MeanShiftModel, n: int, stream: RngStream) -> np.ndarray:
    """n i.i.d. rows from N(mu, Sigma), O(n d) for every covariance family."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream.generator()
    return sample_with(model, n, rng)


def sample_with(model: MeanShiftModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Like sample() but drawing from an already-open generator (keeps one
    replicate's consecutive draws on a single stream)."""
    z = rng.standard_normal((n, model.d))
    cov = model.cov
    if isinstance(cov, Identity):
        x = z
    elif isinstance(cov, Diagonal):
        x = z * np.sqrt(np.asarray(cov.entries))
    elif isinstance(cov, Spiked):
        g = rng.standard_normal((n, 1))
        x = np.sqrt(cov.sigma2) * z + np.sqrt(cov.rho) * g
    else:
        raise TypeError(f"unknown covariance spec {cov!r}")
    if np.any(model.mu != 0.0):
        x = x + model.mu
    return x


def score(model: MeanShiftModel, x: np.ndarray) -> np.ndarray:
    """Score -Sigma^{-1} x of the target P = N(0, Sigma), rowwise for 2-D input.

    Spiked covariance uses the Sherman-Morrison form
    Sigma^{-1} x = x/sigma2 - rho (1^T x) / (sigma2 (sigma2 + rho d)) 1.
    """
    if np.any(model.mu != 0.0):
        raise TargetNotCentered("score is defined for the centred target (mu = 0)")
    x = np.asarray(x, dtype=float)
    cov = model.cov
    if isinstance(cov, Identity):
        return -x
    if isinstance(cov, Diagonal):
        return -x / np.asarray(cov.entries)
    if isinstance(cov, Spiked):
        s = x.sum(axis=-1, keepdims=True)
        return -(x / cov.sigma2 - cov.rho * s / (cov.sigma2 * (cov.sigma2 + cov.rho * cov.d)))
    raise TypeError(f"unknown covariance spec {cov!r}")
