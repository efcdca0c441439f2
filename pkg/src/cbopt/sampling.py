"""Second-point sampling densities, radial step densities and the sphere sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from cbopt.errors import OptimalDensityUndefined
from cbopt.problems import ABOVE, BELOW, Distribution, Objective1D

OPTIMAL_GRID = 4096


class SamplingDensity:
    """One-sided density of the second comparison point around ``anchor``.

    Below-side densities live on ``[lo, hi)`` with ``hi <= anchor``; above-side
    densities live on ``(lo, hi]`` with ``lo >= anchor``.
    """

    side: str
    anchor: float

    def pdf(self, z: float) -> float:
        raise NotImplementedError

    def draw(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        return [b for b in self.support if math.isfinite(b)]


class UniformBand(SamplingDensity):
    __slots__ = ("side", "anchor", "lo", "hi", "_w", "_p")

    def __init__(self, side: str, anchor: float, lo: float, hi: float):
        if not lo < hi:
            raise ValueError(f"uniform band needs lo < hi, got [{lo}, {hi}]")
        self.side = side
        self.anchor = anchor
        self.lo = lo
        self.hi = hi
        self._w = hi - lo
        self._p = 1.0 / (hi - lo)

    def pdf(self, z):
        if self.side == BELOW:
            inside = self.lo <= z < self.hi
        else:
            inside = self.lo < z <= self.hi
        return self._p if inside else 0.0

    def draw(self, rng):
        u = rng.random()
        if self.side == BELOW:
            return self.lo + self._w * u
        return self.hi - self._w * u

    @property
    def support(self):
        return (self.lo, self.hi)

    def __repr__(self):
        return f"UniformBand({self.side}, lo={self.lo}, hi={self.hi})"


class ExponentialBand(SamplingDensity):
    """``lam * exp(-lam |z - anchor|)`` on the chosen side of ``anchor``."""

    __slots__ = ("side", "anchor", "lam")

    def __init__(self, side: str, anchor: float, lam: float):
        if not lam > 0:
            raise ValueError(f"exponential rate must be positive, got {lam}")
        self.side = side
        self.anchor = anchor
        self.lam = lam

    def pdf(self, z):
        dist = self.anchor - z if self.side == BELOW else z - self.anchor
        if dist <= 0:
            return 0.0
        return self.lam * math.exp(-self.lam * dist)

    def draw(self, rng):
        e = rng.standard_exponential()
        while e == 0.0:
            e = rng.standard_exponential()
        step = e / self.lam
        return self.anchor - step if self.side == BELOW else self.anchor + step

    @property
    def support(self):
        if self.side == BELOW:
            return (-math.inf, self.anchor)
        return (self.anchor, math.inf)

    def __repr__(self):
        return f"ExponentialBand({self.side}, anchor={self.anchor}, lam={self.lam})"


class TabulatedBand(SamplingDensity):
    """Density tabulated on a grid; sampled by inverting the cdf linearly.

    Linear interpolation of the inverse cdf samples exactly the piecewise
    constant density ``diff(cdf) / diff(grid)``, so :meth:`pdf` returns that
    cell density and importance weights match the sampler.
    """

    __slots__ = ("side", "anchor", "grid", "cdf", "_dens")

    def __init__(self, side: str, anchor: float, grid: np.ndarray, cdf: np.ndarray):
        self.side = side
        self.anchor = anchor
        self.grid = np.asarray(grid, dtype=float)
        self.cdf = np.asarray(cdf, dtype=float)
        self._dens = np.diff(self.cdf) / np.diff(self.grid)

    def pdf(self, z):
        g = self.grid
        if self.side == BELOW:
            if not g[0] <= z < g[-1]:
                return 0.0
            i = int(np.searchsorted(g, z, side="right")) - 1
        else:
            if not g[0] < z <= g[-1]:
                return 0.0
            i = int(np.searchsorted(g, z, side="left")) - 1
        return float(self._dens[i])

    def draw(self, rng):
        u = rng.random()
        if self.side == ABOVE:
            u = 1.0 - u  # (0, 1]
        z = float(np.interp(u, self.cdf, self.grid))
        # flat cdf segments can map onto a zero-density cell edge; nudge inside
        if self.pdf(z) == 0.0:
            return self.draw(rng)
        return z

    @property
    def support(self):
        return (float(self.grid[0]), float(self.grid[-1]))

    def __repr__(self):
        return f"TabulatedBand({self.side}, [{self.grid[0]}, {self.grid[-1]}], n={self.grid.size})"


def make_uniform_band(x: float, lo: float, hi: float, side: str) -> UniformBand:
    """Uniform on ``[lo, x)`` (below) or ``(x, hi]`` (above).

    At ``x == lo`` (below) or ``x == hi`` (above) the band falls back to a
    unit-width interval just outside the bound.
    """
    if not lo <= x <= hi:
        raise ValueError(f"anchor {x} outside [{lo}, {hi}]")
    if side == BELOW:
        if x == lo:
            return UniformBand(BELOW, x, lo - 1.0, lo)
        return UniformBand(BELOW, x, lo, x)
    if x == hi:
        return UniformBand(ABOVE, x, hi, hi + 1.0)
    return UniformBand(ABOVE, x, x, hi)


def make_exponential_band(x: float, lam: float, side: str) -> ExponentialBand:
    return ExponentialBand(side, x, lam)


def make_optimal_band(dist: Distribution, obj: Objective1D, x: float, side: str, n: int = OPTIMAL_GRID) -> TabulatedBand:
    """Variance-minimizing density, proportional to ``sqrt(F)|h''|`` below the
    anchor and ``sqrt(1-F)|h''|`` above it, tabulated on ``n`` points."""
    lo, hi = dist.effective_support()
    if side == BELOW:
        if x <= lo:
            raise OptimalDensityUndefined(f"no sample mass below x={x}")
        grid = np.linspace(lo, x, n)
        mass = np.sqrt(np.clip(dist.cdf(grid), 0.0, 1.0))
    else:
        if x >= hi:
            raise OptimalDensityUndefined(f"no sample mass above x={x}")
        grid = np.linspace(x, hi, n)
        mass = np.sqrt(np.clip(1.0 - dist.cdf(grid), 0.0, 1.0))
    w = mass * np.abs(obj.cross(x, grid, side))
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))))
    total = cum[-1]
    if not total > 0 or not math.isfinite(total):
        raise OptimalDensityUndefined(f"zero total weight for {obj.name} on the {side} side")
    cdf = cum / total
    cdf[-1] = 1.0
    return TabulatedBand(side, x, grid, cdf)


def draw(density: SamplingDensity, rng: np.random.Generator) -> float:
    return density.draw(rng)


# ---------------------------------------------------------------------------
# band families (config selectors "uniform", "exp:<lam>", "optimal")
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandFamily:
    """Builds the density for an anchor and a side; ``selector`` is the config id."""

    selector: str
    obj: Objective1D
    dist: Distribution

    def __post_init__(self):
        kind, _, arg = self.selector.partition(":")
        lam = 0.0
        if kind == "exp":
            lam = float(arg)
            if not lam > 0:
                raise ValueError("exponential band rate must be positive")
        elif kind == "optimal":
            if self.obj.coeffs is not None and self.obj.coeffs[0] == 0 and self.obj.coeffs[2] == 0:
                raise OptimalDensityUndefined(f"{self.obj.name} has zero cross partial; use uniform or exp bands")
        elif kind != "uniform":
            raise ValueError(f"unknown band selector {self.selector!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lam", lam)

    def __call__(self, x: float, side: str) -> SamplingDensity:
        kind = self.kind
        if kind == "uniform":
            lo, hi = self.obj.bounds
            return make_uniform_band(x, lo, hi, side)
        if kind == "exp":
            return ExponentialBand(side, x, self.lam)
        return make_optimal_band(self.dist, self.obj, x, side)


def band_family(selector: str, obj: Objective1D, dist: Distribution) -> BandFamily:
    return BandFamily(selector.strip(), obj, dist)


# ---------------------------------------------------------------------------
# radial densities and the sphere
# ---------------------------------------------------------------------------


class RadialDensity:
    kind: str

    def pdf(self, z: float) -> float:
        raise NotImplementedError

    def draw(self, rng: np.random.Generator) -> float:
        raise NotImplementedError


class RadialUniform(RadialDensity):
    kind = "runiform"

    def __init__(self, R: float):
        if not R > 0:
            raise ValueError(f"radius must be positive, got {R}")
        self.R = R

    def pdf(self, z):
        return 1.0 / self.R if 0.0 <= z <= self.R else 0.0

    def draw(self, rng):
        return self.R * rng.random()

    @property
    def selector(self) -> str:
        return f"runiform:{self.R:g}"


class RadialExponential(RadialDensity):
    kind = "rexp"

    def __init__(self, lam: float):
        if not lam > 0:
            raise ValueError(f"exponential rate must be positive, got {lam}")
        self.lam = lam

    def pdf(self, z):
        return self.lam * math.exp(-self.lam * z) if z >= 0 else 0.0

    def draw(self, rng):
        return rng.standard_exponential() / self.lam

    @property
    def selector(self) -> str:
        return f"rexp:{self.lam:g}"


def c4_rate_limit(Q: np.ndarray) -> float:
    """``sqrt(d) * lambda_min(Q) / lambda_max(Q)``: exponential rates below it satisfy C4."""
    eig = np.linalg.eigvalsh(np.asarray(Q, dtype=float))
    return math.sqrt(Q.shape[0]) * eig[0] / eig[-1]


def make_radial(kind: str, param: float, *, strict_c4: bool = False, Q=None) -> RadialDensity:
    if kind == "runiform":
        return RadialUniform(param)
    if kind == "rexp":
        if strict_c4:
            if Q is None:
                raise ValueError("strict C4 check needs Q")
            c = c4_rate_limit(Q)
            if not param < c:
                raise ValueError(f"rate {param} must be below {c:.6g} for the C4 guarantee")
        return RadialExponential(param)
    raise ValueError(f"unknown radial kind {kind!r}")


def parse_radial(selector: str, **kw) -> RadialDensity:
    kind, _, val = selector.strip().partition(":")
    if not val:
        raise ValueError(f"radial selector needs a parameter: {selector!r}")
    return make_radial(kind, float(val), **kw)


def sphere_sample(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction scaled to norm ``sqrt(d)``, so ``E[u u^T] = I``."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    g = rng.standard_normal(d)
    n = math.sqrt(float(g @ g))
    while n == 0.0:
        g = rng.standard_normal(d)
        n = math.sqrt(float(g @ g))
    return (g / n) * math.sqrt(d)
