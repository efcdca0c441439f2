"""Comparison-based stochastic optimization.

Solvers here minimize ``E[h(x, xi)]`` while only learning whether a hidden
sample ``xi`` lies above or below chosen query points.
"""

from cbopt.errors import (
    AccessViolation,
    BudgetExceeded,
    CbError,
    DegenerateDistribution,
    DensityInconsistency,
    GapUndefined,
    OptimalDensityUndefined,
    QuadratureError,
)

__version__ = "0.1.0"

__all__ = [
    "AccessViolation",
    "BudgetExceeded",
    "CbError",
    "DegenerateDistribution",
    "DensityInconsistency",
    "GapUndefined",
    "OptimalDensityUndefined",
    "QuadratureError",
]
