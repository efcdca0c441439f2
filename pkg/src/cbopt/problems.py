"""Test objectives, sample distributions and ground truth.

All built-in objectives share one shape: with ``d = x - xi``,

    h(x, xi) = aL*d**2 + bL*d          if xi < x
    h(x, xi) = aU*d**2 - bU*d          if xi >= x

so one-sided derivatives, cross partials and the expected cost follow from
the partial moments of the sample distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from cbopt.errors import DegenerateDistribution, GapUndefined, QuadratureError
from cbopt.special import normal_cdf, normal_pdf

BELOW = "below"
ABOVE = "above"

# normal laws are integrated over mean +- TAIL_SD standard deviations
TAIL_SD = 10.0
QUAD_EPSABS = 1e-10
XSTAR_WIDTH = 1e-8


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------


class Distribution:
    """A one-dimensional law for the hidden sample."""

    kind: str = ""

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def effective_support(self) -> tuple[float, float]:
        """Finite interval holding all but a negligible amount of mass."""
        return self.support

    def sample(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def cdf(self, z):
        raise NotImplementedError

    def pdf(self, z):
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        """Points where the density has kinks, for quadrature splitting."""
        return []

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def var(self) -> float:
        raise NotImplementedError

    def partial_moments(self, x):
        """``(F, M1L, M2L, M1U, M2U)`` at ``x``.

        ``M1L = E[(x-xi)^+]``, ``M2L = E[((x-xi)^+)^2]`` and the ``U`` pair
        is the same for ``(xi-x)^+``.  Returns None when no closed form exists.
        """
        return None

    @property
    def ident(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Distribution):
    a: float
    b: float
    kind = "uniform"

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"uniform needs a < b, got [{self.a}, {self.b}]")

    @property
    def support(self):
        return (self.a, self.b)

    def sample(self, rng):
        return self.a + (self.b - self.a) * rng.random()

    def cdf(self, z):
        return np.clip((np.asarray(z, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.where((z >= self.a) & (z <= self.b), 1.0 / (self.b - self.a), 0.0)

    def breakpoints(self):
        return [self.a, self.b]

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    @property
    def var(self):
        return (self.b - self.a) ** 2 / 12.0

    def partial_moments(self, x):
        a, b, w = self.a, self.b, self.b - self.a
        x = np.asarray(x, dtype=float)
        c = np.clip(x, a, b)
        F = (c - a) / w
        m1l = ((x - a) ** 2 - (x - c) ** 2) / (2 * w)
        m2l = ((x - a) ** 3 - (x - c) ** 3) / (3 * w)
        m1u = ((b - x) ** 2 - (c - x) ** 2) / (2 * w)
        m2u = ((b - x) ** 3 - (c - x) ** 3) / (3 * w)
        return F, m1l, m2l, m1u, m2u

    @property
    def ident(self):
        return f"uniform:{_fmt(self.a)},{_fmt(self.b)}"


@dataclass(frozen=True)
class Normal(Distribution):
    loc: float
    variance: float
    kind = "normal"

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"normal needs variance > 0, got {self.variance}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    @property
    def support(self):
        return (-math.inf, math.inf)

    def effective_support(self):
        return (self.loc - TAIL_SD * self.sd, self.loc + TAIL_SD * self.sd)

    def sample(self, rng):
        return rng.normal(self.loc, self.sd)

    def cdf(self, z):
        if np.ndim(z) == 0:
            return normal_cdf((z - self.loc) / self.sd)
        return normal_cdf((np.asarray(z, dtype=float) - self.loc) / self.sd)

    def pdf(self, z):
        return normal_pdf((np.asarray(z, dtype=float) - self.loc) / self.sd) / self.sd

    @property
    def mean(self):
        return self.loc

    @property
    def var(self):
        return self.variance

    def partial_moments(self, x):
        s = self.sd
        u = (np.asarray(x, dtype=float) - self.loc) / s
        Phi = normal_cdf(u)
        phi = normal_pdf(u)
        Q = 1.0 - Phi
        m1l = s * (u * Phi + phi)
        m2l = s * s * ((u * u + 1) * Phi + u * phi)
        m1u = s * (phi - u * Q)
        m2u = s * s * ((u * u + 1) * Q - u * phi)
        return Phi, m1l, m2l, m1u, m2u

    @property
    def ident(self):
        return f"normal:{_fmt(self.loc)},{_fmt(self.variance)}"


@dataclass(frozen=True)
class Mixture(Distribution):
    """Finite mixture; test-only (not part of the config grammar)."""

    components: tuple
    weights: tuple
    kind = "mixture"

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise ValueError("mixture needs matching, non-empty components and weights")
        if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
            raise ValueError("mixture weights must be nonnegative and sum to 1")

    @property
    def support(self):
        los, his = zip(*(c.support for c in self.components))
        return (min(los), max(his))

    def effective_support(self):
        los, his = zip(*(c.effective_support() for c in self.components))
        return (min(los), max(his))

    def sample(self, rng):
        u = rng.random()
        acc = 0.0
        for c, w in zip(self.components, self.weights):
            acc += w
            if u < acc:
                return c.sample(rng)
        return self.components[-1].sample(rng)

    def cdf(self, z):
        return sum(w * c.cdf(z) for c, w in zip(self.components, self.weights))

    def pdf(self, z):
        return sum(w * c.pdf(z) for c, w in zip(self.components, self.weights))

    def breakpoints(self):
        return sorted({p for c in self.components for p in c.breakpoints()})

    @property
    def mean(self):
        return sum(w * c.mean for c, w in zip(self.components, self.weights))

    @property
    def var(self):
        m = self.mean
        return sum(w * (c.var + (c.mean - m) ** 2) for c, w in zip(self.components, self.weights))

    @property
    def ident(self):
        parts = ";".join(f"{w}*{c.ident}" for c, w in zip(self.components, self.weights))
        return f"mixture[{parts}]"


@dataclass(frozen=True)
class PointMass(Distribution):
    """Deterministic sample; test double for the resampling cap."""

    value: float
    kind = "point"

    @property
    def support(self):
        return (self.value, self.value)

    def sample(self, rng):
        return self.value

    def cdf(self, z):
        return np.where(np.asarray(z, dtype=float) >= self.value, 1.0, 0.0)

    @property
    def mean(self):
        return self.value

    @property
    def var(self):
        return 0.0

    @property
    def ident(self):
        return f"point:{_fmt(self.value)}"


@dataclass(frozen=True)
class IsotropicNormal:
    """``N(mean, sd^2 I_d)`` for the quadratic problem."""

    mean: tuple
    sd: float

    @property
    def dim(self) -> int:
        return len(self.mean)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(np.asarray(self.mean), self.sd)

    @property
    def cov_trace_factor(self) -> float:
        return self.sd * self.sd


def parse_distribution(ident: str) -> Distribution:
    """Parse ``uniform:<a>,<b>`` or ``normal:<mean>,<variance>``."""
    kind, _, args = ident.strip().partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ValueError(f"bad distribution id {ident!r}") from None
    if kind == "uniform" and len(vals) == 2:
        return Uniform(*vals)
    if kind == "normal" and len(vals) == 2:
        return Normal(*vals)
    raise ValueError(f"unknown distribution id {ident!r}")


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Objective1D:
    """A cost ``h(x, xi)`` with the derivative data the estimators need.

    ``dx(x, xi)`` is the partial derivative in ``x`` for ``xi != x``;
    ``cross(x, z, side)`` is the mixed partial, where ``side`` only matters
    at ``z == x``.  ``coeffs`` holds ``(aL, bL, aU, bU)`` for objectives of
    the piecewise-quadratic family and enables closed-form expectations.
    """

    name: str
    h: Callable[[float, float], float]
    dx: Callable[[float, float], float]
    dleft: Callable[[float], float]
    dright: Callable[[float], float]
    cross: Callable
    mu: float = 0.0
    lip: Optional[float] = None
    bounds: tuple[float, float] = (50.0, 150.0)
    coeffs: Optional[tuple[float, float, float, float]] = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo <= hi:
            raise ValueError(f"bounds must satisfy l <= u, got {self.bounds}")

    def with_bounds(self, lo: float, hi: float) -> "Objective1D":
        return Objective1D(
            self.name, self.h, self.dx, self.dleft, self.dright, self.cross,
            self.mu, self.lip, (float(lo), float(hi)), self.coeffs,
        )


def piecewise_quadratic(name, aL, bL, aU, bU, mu=0.0, lip=None, bounds=(50.0, 150.0)) -> Objective1D:
    """Objective with ``aL*d^2 + bL*d`` below and ``aU*d^2 - bU*d`` above (``d = x - xi``)."""

    def h(x, xi):
        d = x - xi
        if xi < x:
            return aL * d * d + bL * d
        return aU * d * d - bU * d

    def dx(x, xi):
        d = x - xi
        if xi < x:
            return 2.0 * aL * d + bL
        return 2.0 * aU * d - bU

    def cross(x, z, side=None):
        if np.ndim(z) or np.ndim(x):
            below = np.asarray(z) < np.asarray(x)
            if side is not None:
                below = below | ((np.asarray(z) == np.asarray(x)) & (side == BELOW))
            return np.where(below, -2.0 * aL, -2.0 * aU)
        if z < x or (z == x and side == BELOW):
            return -2.0 * aL
        return -2.0 * aU

    return Objective1D(
        name=name, h=h, dx=dx,
        dleft=lambda x: bL, dright=lambda x: -bU,
        cross=cross, mu=mu, lip=lip, bounds=tuple(bounds), coeffs=(aL, bL, aU, bU),
    )


def h1(bounds=(50.0, 150.0)) -> Objective1D:
    return piecewise_quadratic("h1", 1.0, 0.0, 1.0, 0.0, mu=2.0, lip=2.0, bounds=bounds)


def h2(bounds=(50.0, 150.0)) -> Objective1D:
    return piecewise_quadratic("h2", 1.0, 1.0, 2.0, 2.0, mu=2.0, bounds=bounds)


def newsvendor(holding: float, backorder: float, bounds=(50.0, 150.0)) -> Objective1D:
    if not (holding > 0 and backorder > 0):
        raise ValueError("newsvendor costs must be strictly positive")
    name = f"newsvendor:H={_fmt(holding)},B={_fmt(backorder)}"
    return piecewise_quadratic(name, 0.0, holding, 0.0, backorder, bounds=bounds)


def parse_objective(ident: str, bounds=(50.0, 150.0)) -> Objective1D:
    """Parse ``h1``, ``h2`` or ``newsvendor:H=<v>,B=<v>``."""
    ident = ident.strip()
    if ident == "h1":
        return h1(bounds)
    if ident == "h2":
        return h2(bounds)
    if ident.startswith("newsvendor:"):
        params = {}
        for part in ident.split(":", 1)[1].split(","):
            key, _, val = part.partition("=")
            params[key.strip().upper()] = float(val)
        if set(params) != {"H", "B"}:
            raise ValueError(f"newsvendor id needs H and B: {ident!r}")
        return newsvendor(params["H"], params["B"], bounds)
    raise ValueError(f"unknown objective id {ident!r}")


def h_value(obj: Objective1D, x: float, xi: float) -> float:
    return obj.h(x, xi)


def one_sided_derivatives(obj: Objective1D, x: float) -> tuple[float, float]:
    return obj.dleft(x), obj.dright(x)


def cross_partial(obj: Objective1D, x: float, z: float) -> float:
    if z == x:
        raise ValueError("cross partial is undefined at z == x; pass z != x")
    return obj.cross(x, z)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    H: Callable
    Hprime: Callable
    xstar: float
    Hstar: float
    method: str


def _closed_form(obj: Objective1D, dist: Distribution):
    if obj.coeffs is None or dist.partial_moments(0.0) is None:
        return None
    aL, bL, aU, bU = obj.coeffs

    def H(x):
        F, m1l, m2l, m1u, m2u = dist.partial_moments(x)
        return aL * m2l + bL * m1l + aU * m2u + bU * m1u

    def Hprime(x):
        F, m1l, m2l, m1u, m2u = dist.partial_moments(x)
        return 2 * aL * m1l + bL * F - 2 * aU * m1u - bU * (1.0 - F)

    return H, Hprime


def _quad(fun, lo, hi, points):
    pts = sorted(p for p in set(points) if lo < p < hi)
    edges = [lo, *pts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        res = integrate.quad(fun, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200, full_output=1)
        if len(res) == 4 and "roundoff" not in res[3]:
            raise QuadratureError(f"quadrature failed on [{a}, {b}]: {res[3]}")
        total += res[0]
    return total


def _quadrature(obj: Objective1D, dist: Distribution):
    lo, hi = dist.effective_support()
    kinks = dist.breakpoints()

    def H(x):
        def f(xi):
            return obj.h(x, xi) * float(dist.pdf(xi))
        return _quad(f, lo, hi, [*kinks, x])

    def Hprime(x):
        def f(xi):
            return obj.dx(x, xi) * float(dist.pdf(xi))
        return _quad(f, lo, hi, [*kinks, x])

    return np.vectorize(H, otypes=[float]), np.vectorize(Hprime, otypes=[float])


def _bisect_root(fprime, lo, hi, width=XSTAR_WIDTH):
    if fprime(lo) >= 0:
        return lo
    if fprime(hi) <= 0:
        return hi
    a, b = lo, hi
    while b - a > width:
        m = 0.5 * (a + b)
        if fprime(m) > 0:
            b = m
        else:
            a = m
    return min(max(0.5 * (a + b), lo), hi)


def ground_truth(obj: Objective1D, dist: Distribution, method: str = "auto") -> GroundTruth:
    """Expected cost ``H``, its derivative and the minimizer over ``obj.bounds``.

    ``method`` is ``"closed-form"``, ``"quadrature"`` or ``"auto"`` (closed
    form whenever the objective/distribution pair admits one).
    """
    if isinstance(dist, PointMass):
        raise DegenerateDistribution("ground truth needs a non-degenerate law")
    funcs = None
    if method in ("auto", "closed-form"):
        funcs = _closed_form(obj, dist)
        if funcs is None and method == "closed-form":
            raise ValueError(f"no closed form for {obj.name} under {dist.ident}")
        used = "closed-form"
    if funcs is None:
        funcs = _quadrature(obj, dist)
        used = "quadrature"
    H, Hprime = funcs
    lo, hi = obj.bounds
    xstar = _bisect_root(lambda x: float(Hprime(x)), lo, hi)
    return GroundTruth(H=H, Hprime=Hprime, xstar=xstar, Hstar=float(H(xstar)), method=used)


def relative_gap(gt: GroundTruth, x):
    """``(H(x) - H*) / H*``; raises :class:`GapUndefined` when ``H* == 0``."""
    if gt.Hstar == 0:
        raise GapUndefined("optimal value is zero; report the absolute gap instead")
    return (gt.H(x) - gt.Hstar) / gt.Hstar


def absolute_gap(gt: GroundTruth, x):
    return gt.H(x) - gt.Hstar


# ---------------------------------------------------------------------------
# assumption constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionConstants:
    K1: float
    K2: float
    K3: float

    @property
    def G2(self) -> float:
        return self.K1 ** 2 + 2 * self.K3

    @property
    def sigma2(self) -> float:
        return self.K2 ** 2 + 2 * self.K3


def _side_weight_integral(obj, dist, band, x, side):
    """``int F(z) cross^2 / f_-`` (below) or ``int (1-F) cross^2 / f_+`` (above)."""
    lo, hi = dist.effective_support()
    if side == BELOW:
        a, b = lo, x
        if b <= a:
            return 0.0
        tail = lambda z: float(dist.cdf(z))
    else:
        a, b = x, hi
        if b <= a:
            return 0.0
        tail = lambda z: 1.0 - float(dist.cdf(z))

    def f(z):
        F = tail(z)
        if F == 0.0:
            return 0.0
        c = obj.cross(x, z, side)
        if c == 0.0:
            return 0.0
        p = band.pdf(z)
        if p <= 0.0:
            return math.inf
        return F * c * c / p

    pts = [*dist.breakpoints(), *getattr(band, "breakpoints", lambda: [])()]
    return _quad(f, a, b, pts)


def assumption_constants(
    obj: Objective1D,
    dist: Distribution,
    band_factory: Callable,
    grid: int = 41,
) -> AssumptionConstants:
    """Bound the second-moment constants by maximizing over a grid of iterates.

    ``band_factory(x, side)`` must return a density with a ``pdf`` method.
    Used for reporting only.
    """
    lo, hi = obj.bounds
    _, Hp = _quadrature(obj, dist)
    elo, ehi = dist.effective_support()
    kinks = dist.breakpoints()
    k1sq = k2sq = k3 = 0.0
    for x in np.linspace(lo, hi, grid):
        x = float(x)
        second = _quad(lambda xi: obj.dx(x, xi) ** 2 * float(dist.pdf(xi)), elo, ehi, [*kinks, x])
        hp = float(Hp(x))
        k1sq = max(k1sq, second)
        k2sq = max(k2sq, second - hp * hp)
        for side in (BELOW, ABOVE):
            try:
                band = band_factory(x, side)
            except Exception:
                continue
            k3 = max(k3, _side_weight_integral(obj, dist, band, x, side))
    return AssumptionConstants(K1=math.sqrt(k1sq), K2=math.sqrt(max(k2sq, 0.0)), K3=k3)


# ---------------------------------------------------------------------------
# quadratic problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticProblem:
    """``h(x, xi) = 0.5 (x - xi)^T Q (x - xi)`` over a box."""

    Q: np.ndarray
    dist: IsotropicNormal
    box: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        eig = np.linalg.eigvalsh(Q)
        if eig[0] <= 0:
            raise ValueError(f"Q must be positive definite, smallest eigenvalue {eig[0]}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "_eig", (float(eig[0]), float(eig[-1])))

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def mu(self) -> float:
        return self._eig[0]

    @property
    def lip(self) -> float:
        return self._eig[1]

    def h(self, x, xi) -> float:
        d = np.asarray(x) - np.asarray(xi)
        return 0.5 * float(d @ self.Q @ d)

    def grad(self, x, xi) -> np.ndarray:
        return self.Q @ (np.asarray(x) - np.asarray(xi))

    def ground_truth(self) -> "QPGroundTruth":
        m = np.asarray(self.dist.mean, dtype=float)
        lo, hi = self.box
        noise = 0.5 * self.dist.cov_trace_factor * float(np.trace(self.Q))
        xstar = _box_qp_min(self.Q, m, lo, hi)
        d = xstar - m
        return QPGroundTruth(Q=self.Q, mean=m, noise=noise, xstar=xstar, Hstar=0.5 * float(d @ self.Q @ d) + noise)


def _box_qp_min(Q, m, lo, hi, iters=100000, tol=1e-13):
    x = np.clip(m, lo, hi)
    if np.array_equal(x, m):
        return x
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    for _ in range(iters):
        nxt = np.clip(x - step * (Q @ (x - m)), lo, hi)
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


@dataclass(frozen=True)
class QPGroundTruth:
    Q: np.ndarray
    mean: np.ndarray
    noise: float
    xstar: np.ndarray
    Hstar: float

    def H(self, x):
        """Expected cost at one point (shape ``(d,)``) or many (shape ``(n, d)``)."""
        d = np.asarray(x, dtype=float) - self.mean
        return 0.5 * np.einsum("...i,ij,...j->...", d, self.Q, d) + self.noise

    def relative_gap(self, x):
        return (self.H(x) - self.Hstar) / self.Hstar


def _fmt(v: float) -> str:
    return f"{v:g}"
