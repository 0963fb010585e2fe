"""Exception and warning types shared across the package."""


class TargetNotCentered(ValueError):
    """Score requested for a model whose mean is not the zero vector."""


class DegenerateBandwidth(ValueError):
    """Median-heuristic bandwidth resolved to zero (all points identical)."""


class InsufficientSample(ValueError):
    """A U-statistic or moment estimate was requested with too few rows."""


class DegenerateDenominator(ZeroDivisionError):
    """sigma_cond (or another required scale) is zero where a ratio is needed."""


class GammaMatchInfeasible(ValueError):
    """Welch-Satterthwaite Gamma matching requires a positive mean."""


class NotPSD(ValueError):
    """A matrix required to be positive semi-definite has a genuinely negative eigenvalue."""


class UnsupportedAnalyticCdf(TypeError):
    """The requested limit variant has no analytic CDF; sample it instead."""


class UnsupportedSummand(TypeError):
    """The operation does not support this summand kind."""


class InvalidInput(ValueError):
    """Malformed numeric input (e.g. unsorted samples where sorted are required)."""


class NonIdentityCovariance(ValueError):
    """A closed form that assumes identity covariance got something else."""


class DegenerateBandwidthWarning(UserWarning):
    """All pairwise distances were zero; the returned bandwidth is 0."""


class DegenerateGaussianLimitWarning(UserWarning):
    """sigma_cond = 0: the Gaussian limit collapses to a point mass at D."""
