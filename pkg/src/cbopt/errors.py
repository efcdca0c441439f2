"""Exception hierarchy shared by all modules."""


class CbError(Exception):
    """Base class for every error raised by cbopt."""


class BudgetExceeded(CbError):
    """A round was asked more comparisons than it allows."""


class AccessViolation(CbError):
    """The hidden sample was requested through a comparison-only round."""


class DegenerateDistribution(CbError):
    """Resampling could not produce a sample different from the iterate."""


class DensityInconsistency(CbError):
    """An importance weight was requested where the density vanishes."""


class OptimalDensityUndefined(CbError):
    """The variance-optimal sampling density has zero total weight."""


class GapUndefined(CbError):
    """Relative gap requested while the optimal value is zero."""


class QuadratureError(CbError):
    """Numerical integration failed to reach its tolerance."""
