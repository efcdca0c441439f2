"""Comparison oracle: the only channel through which solvers learn about a sample.

A :class:`Round` owns one hidden sample and a comparison budget.  Solvers
receive outcome values, never the sample itself; only rounds opened with
``baseline=True`` may reveal it, for the full-information SGD reference.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from cbopt.errors import AccessViolation, BudgetExceeded, DegenerateDistribution
from cbopt.problems import ABOVE, BELOW, Distribution
from cbopt.sampling import ExponentialBand, SamplingDensity, UniformBand

MAX_RESAMPLE = 100


class BinaryOutcome(enum.Enum):
    SAMPLE_BELOW = "below"  # xi <= point (ties land here)
    SAMPLE_ABOVE = "above"  # xi > point


SAMPLE_BELOW = BinaryOutcome.SAMPLE_BELOW
SAMPLE_ABOVE = BinaryOutcome.SAMPLE_ABOVE


class PairOutcome(enum.Enum):
    PLUS_SMALLER = "plus"
    MINUS_SMALLER_OR_EQUAL = "minus"


PLUS_SMALLER = PairOutcome.PLUS_SMALLER
MINUS_SMALLER_OR_EQUAL = PairOutcome.MINUS_SMALLER_OR_EQUAL


@dataclass(frozen=True)
class CategoricalOutcome:
    side: str
    band: int


class Round:
    """One hidden sample with a comparison budget."""

    __slots__ = ("_xi", "budget", "used", "mode", "baseline", "revealed", "_Q")

    def __init__(self, xi, budget: int, mode: str = "binary-1d", baseline: bool = False, Q=None):
        self._xi = xi
        self.budget = budget
        self.used = 0
        self.mode = mode
        self.baseline = baseline
        self.revealed = False
        self._Q = Q

    def __repr__(self):
        return f"Round(mode={self.mode}, budget={self.budget}, used={self.used})"

    def _spend(self):
        if self.budget <= 0:
            raise BudgetExceeded(f"round budget exhausted after {self.used} comparisons")
        self.budget -= 1
        self.used += 1

    def compare(self, point: float) -> BinaryOutcome:
        """SAMPLE_BELOW iff ``xi <= point``."""
        self._spend()
        return SAMPLE_BELOW if self._xi <= point else SAMPLE_ABOVE

    def compare_categorical(self, x: float, scheme: "CategoricalScheme") -> CategoricalOutcome:
        if self.mode == "qp":
            raise TypeError("categorical comparisons need a one-dimensional round")
        self._spend()
        xi = self._xi
        if xi < x:
            return CategoricalOutcome(BELOW, scheme.band_of(x - xi))
        return CategoricalOutcome(ABOVE, scheme.band_of(xi - x))

    def _h(self, p) -> float:
        d = p - self._xi
        return 0.5 * float(d @ self._Q @ d)

    def qp_compare_pair(self, x, u, z: float) -> PairOutcome:
        """Which of ``x + z u`` and ``x - z u`` costs less; ties go to the minus side."""
        if self.mode != "qp":
            raise TypeError("value comparisons need a qp round")
        self._spend()
        zu = z * u
        if self._h(x + zu) < self._h(x - zu):
            return PLUS_SMALLER
        return MINUS_SMALLER_OR_EQUAL

    def qp_compare_winner_vs_center(self, winner, x) -> bool:
        """True iff ``h(winner) <= h(x)``."""
        if self.mode != "qp":
            raise TypeError("value comparisons need a qp round")
        self._spend()
        return self._h(winner) <= self._h(x)

    def reveal_for_baseline(self):
        if not self.baseline:
            raise AccessViolation("hidden sample requested through a comparison-only round")
        self.revealed = True
        return self._xi


def begin_round(
    dist: Distribution,
    x: float,
    rng: np.random.Generator,
    *,
    budget: int = 2,
    baseline: bool = False,
    max_resample: int = MAX_RESAMPLE,
) -> Round:
    """Draw a sample different from ``x`` and wrap it in a round."""
    xi = dist.sample(rng)
    tries = 1
    while xi == x:
        if tries >= max_resample:
            raise DegenerateDistribution(f"sample equalled the iterate {max_resample} times in a row")
        xi = dist.sample(rng)
        tries += 1
    return Round(xi, budget, "binary-1d", baseline)


def begin_qp_round(dist, x, Q, rng: np.random.Generator, *, budget: int = 2, baseline: bool = False) -> Round:
    return Round(dist.sample(rng), budget, "qp", baseline, Q=Q)


# ---------------------------------------------------------------------------
# categorical comparisons
# ---------------------------------------------------------------------------


def _default_band_density(lam: float):
    def make(x: float, side: str, lo_gap: float, hi_gap: float) -> SamplingDensity:
        if math.isinf(hi_gap):
            anchor = x - lo_gap if side == BELOW else x + lo_gap
            return ExponentialBand(side, anchor, lam)
        if side == BELOW:
            return UniformBand(BELOW, x, x - hi_gap, x - lo_gap)
        return UniformBand(ABOVE, x, x + lo_gap, x + hi_gap)

    return make


class CategoricalScheme:
    """Gap thresholds ``0 = theta_0 < ... < theta_m = inf`` and per-band densities.

    ``band_density(x, side, theta_i, theta_{i+1})`` builds the density used for
    the second point inside band ``i``.  The default is uniform on bounded
    bands and exponential with rate ``lam`` on the unbounded outer band.
    """

    def __init__(self, thresholds: Sequence[float], band_density: Optional[Callable] = None, lam: float = 0.0625):
        th = tuple(float(t) for t in thresholds)
        if len(th) < 2 or th[0] != 0.0 or not math.isinf(th[-1]):
            raise ValueError(f"thresholds must start at 0 and end at inf, got {thresholds}")
        if any(b <= a for a, b in zip(th[:-1], th[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {thresholds}")
        self.thresholds = th
        self._inner = th[1:-1]
        self.lam = lam
        self.band_density = band_density or _default_band_density(lam)

    @property
    def m(self) -> int:
        return len(self.thresholds) - 1

    def band_of(self, gap: float) -> int:
        """Band ``i`` with ``theta_i < gap <= theta_{i+1}`` (``gap > 0``)."""
        return bisect.bisect_left(self._inner, gap)

    def density(self, x: float, out: CategoricalOutcome) -> SamplingDensity:
        i = out.band
        return self.band_density(x, out.side, self.thresholds[i], self.thresholds[i + 1])

    def describe(self) -> str:
        inner = ",".join(f"{t:g}" for t in self.thresholds[:-1])
        return f"theta=({inner},inf);lam={self.lam:g}"

    def __repr__(self):
        return f"CategoricalScheme({self.describe()})"


DEFAULT_THRESHOLDS = {
    1: (0.0, math.inf),
    3: (0.0, 3.0, 7.0, math.inf),
    5: (0.0, 2.0, 4.0, 7.0, 12.0, math.inf),
}


def default_scheme(m: int, lam: float = 0.0625) -> CategoricalScheme:
    if m not in DEFAULT_THRESHOLDS:
        raise ValueError(f"no default thresholds for m={m}; pass explicit thresholds")
    return CategoricalScheme(DEFAULT_THRESHOLDS[m], lam=lam)
