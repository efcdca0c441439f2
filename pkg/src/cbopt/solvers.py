"""Projected stochastic-gradient solvers driven by comparison oracles.

Every solver records the iterates ``x_1..x_T`` (pre-update), their running
averages ``xbar_t = mean(x_1..x_t)`` and, when ground truth is given, the
relative gap of each running average.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from cbopt.estimators import grad_cba, grad_cba_categorical, grad_qp
from cbopt.oracle import (
    PLUS_SMALLER,
    SAMPLE_BELOW,
    CategoricalScheme,
    begin_qp_round,
    begin_round,
)
from cbopt.problems import ABOVE, BELOW, Distribution, GroundTruth, Objective1D, QuadraticProblem, QPGroundTruth
from cbopt.sampling import BandFamily, RadialDensity, sphere_sample

# ---------------------------------------------------------------------------
# step sizes
# ---------------------------------------------------------------------------


class StepSchedule:
    """Step length ``eta_t`` for ``t >= 1``."""

    def __call__(self, t: int) -> float:
        raise NotImplementedError

    def steps(self, T: int) -> np.ndarray:
        return np.array([self(t) for t in range(1, T + 1)], dtype=float)


@dataclass(frozen=True)
class ConstOverSqrtT(StepSchedule):
    T: int

    def __call__(self, t):
        return 1.0 / math.sqrt(self.T)


@dataclass(frozen=True)
class InvSqrtT(StepSchedule):
    def __call__(self, t):
        return 1.0 / math.sqrt(t)


@dataclass(frozen=True)
class SmoothConst(StepSchedule):
    L: float
    T: int

    def __call__(self, t):
        return 1.0 / (self.L + math.sqrt(self.T))


@dataclass(frozen=True)
class SmoothDecay(StepSchedule):
    L: float

    def __call__(self, t):
        return 1.0 / (self.L + math.sqrt(t))


@dataclass(frozen=True)
class Strong(StepSchedule):
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("strongly convex schedule needs mu > 0")

    def __call__(self, t):
        return 1.0 / (self.mu * t)


@dataclass(frozen=True)
class StrongSmooth(StepSchedule):
    mu: float
    L: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("strongly convex schedule needs mu > 0")

    def __call__(self, t):
        return 1.0 / (self.mu * t + self.L)


@dataclass(frozen=True)
class Stage(StepSchedule):
    k: int
    mu: float

    def __call__(self, t):
        return 1.0 / (2 ** (self.k + 1) * self.mu)


@dataclass(frozen=True)
class StageSmooth(StepSchedule):
    k: int
    mu: float
    L: float

    def __call__(self, t):
        return 1.0 / (2 ** (self.k + 1) * self.mu + self.L)


def step_size(s: StepSchedule, t: int) -> float:
    if t < 1:
        raise ValueError("iterations are numbered from 1")
    return s(t)


@dataclass(frozen=True)
class StagePlan:
    """Restart schedule: variant ``"A"`` uses ``T_k = 2^(k+3)`` and steps
    ``1/(2^(k+1) mu)``; variant ``"B"`` uses ``T_k = 2^(k+3) + 4`` and
    ``1/(2^(k+1) mu + L)``."""

    K: int
    variant: str
    mu: float
    L: float = 0.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("need at least one stage")
        if self.variant not in ("A", "B"):
            raise ValueError("variant must be 'A' or 'B'")
        if not self.mu > 0:
            raise ValueError("restarts need mu > 0")

    @property
    def stages(self) -> list[tuple[int, StepSchedule]]:
        out = []
        for k in range(1, self.K + 1):
            if self.variant == "A":
                out.append((2 ** (k + 3), Stage(k, self.mu)))
            else:
                out.append((2 ** (k + 3) + 4, StageSmooth(k, self.mu, self.L)))
        return out

    @property
    def total(self) -> int:
        return sum(T for T, _ in self.stages)

    @classmethod
    def covering(cls, horizon: int, variant: str, mu: float, L: float = 0.0) -> "StagePlan":
        """Fewest stages whose total reaches ``horizon``."""
        K = 1
        while cls(K, variant, mu, L).total < horizon:
            K += 1
        return cls(K, variant, mu, L)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def project_interval(v: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, v))


def project_box(v, box) -> np.ndarray:
    lo, hi = box
    return np.minimum(np.maximum(v, lo), hi)


# ---------------------------------------------------------------------------
# configuration and records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Average:
    pass


@dataclass(frozen=True)
class RandomIndex:
    """Output ``x_{t*}`` with ``P(t* = t)`` proportional to ``eta_t``."""

    rho: Optional[float] = None


@dataclass
class SolverConfig:
    x1: Union[float, np.ndarray]
    T: int
    schedule: StepSchedule
    bounds: tuple
    batch: int = 1
    output: Union[Average, RandomIndex] = field(default_factory=Average)
    seed: Optional[int] = None

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.batch < 1:
            raise ValueError("batch size must be at least 1")
        lo, hi = self.bounds
        if np.any(np.asarray(self.x1) < lo) or np.any(np.asarray(self.x1) > hi):
            raise ValueError("starting point must be feasible")

    def rng(self, rng: Optional[np.random.Generator]) -> np.random.Generator:
        if rng is not None:
            return rng
        return np.random.default_rng(self.seed)


@dataclass
class RunRecord:
    iterates: np.ndarray
    averages: np.ndarray
    output: Union[float, np.ndarray]
    comparisons: int
    samples: int
    gaps: Optional[np.ndarray] = None
    wall_time: float = 0.0
    t_star: Optional[int] = None
    stage_outputs: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.iterates)


def split_streams(rng: np.random.Generator):
    """Child streams for the hidden samples and for the solver's own draws.

    Keeping them apart makes the sample sequence independent of how many
    variates a band or radial sampler consumes.
    """
    xi_rng, aux_rng = rng.spawn(2)
    return xi_rng, aux_rng


def _gaps(gt, averages):
    if gt is None:
        return None
    if isinstance(gt, QPGroundTruth):
        return np.asarray(gt.relative_gap(averages), dtype=float)
    return np.asarray((gt.H(averages) - gt.Hstar) / gt.Hstar, dtype=float)


def _finish(cfg, xs, avgs, comparisons, samples, gt, t0, schedule, rng):
    rec = RunRecord(
        iterates=xs, averages=avgs, output=avgs[-1].copy() if xs.ndim > 1 else float(avgs[-1]),
        comparisons=comparisons, samples=samples, gaps=_gaps(gt, avgs),
    )
    if isinstance(cfg.output, RandomIndex):
        t_star, x = random_index_output(rec, schedule, rng)
        rec.t_star = t_star
        rec.output = x
    rec.wall_time = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# one-dimensional solvers
# ---------------------------------------------------------------------------


def run_cba(
    cfg: SolverConfig,
    dist: Distribution,
    obj: Objective1D,
    bands: BandFamily,
    gt: Optional[GroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
) -> RunRecord:
    """Comparison-based projected SGD with ``cfg.batch`` second points per round."""
    rng = cfg.rng(rng)
    xi_rng, aux = split_streams(rng)
    t0 = time.perf_counter()
    T, S, eta = cfg.T, cfg.batch, cfg.schedule
    lo, hi = cfg.bounds
    x = float(cfg.x1)
    xs = np.empty(T)
    avgs = np.empty(T)
    avg = 0.0
    comparisons = 0
    for t in range(1, T + 1):
        xs[t - 1] = x
        avg += (x - avg) / t
        avgs[t - 1] = avg
        rnd = begin_round(dist, x, xi_rng, budget=1 + S)
        first = rnd.compare(x)
        band = bands(x, BELOW if first is SAMPLE_BELOW else ABOVE)
        if S == 1:
            z = band.draw(aux)
            g = grad_cba(x, first, z, rnd.compare(z), obj, band).value
        else:
            # all second points are drawn before any is compared
            zs = [band.draw(aux) for _ in range(S)]
            g = 0.0
            for z in zs:
                g += grad_cba(x, first, z, rnd.compare(z), obj, band).value
            g /= S
        comparisons += rnd.used
        x = project_interval(x - eta(t) * g, lo, hi)
    return _finish(cfg, xs, avgs, comparisons, T, gt, t0, eta, rng)


def run_cba_c(
    cfg: SolverConfig,
    dist: Distribution,
    obj: Objective1D,
    scheme: CategoricalScheme,
    gt: Optional[GroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
) -> RunRecord:
    """CBA with a categorical first comparison reporting the gap band."""
    rng = cfg.rng(rng)
    xi_rng, aux = split_streams(rng)
    t0 = time.perf_counter()
    T, eta = cfg.T, cfg.schedule
    lo, hi = cfg.bounds
    x = float(cfg.x1)
    xs = np.empty(T)
    avgs = np.empty(T)
    avg = 0.0
    comparisons = 0
    for t in range(1, T + 1):
        xs[t - 1] = x
        avg += (x - avg) / t
        avgs[t - 1] = avg
        rnd = begin_round(dist, x, xi_rng, budget=2)
        out = rnd.compare_categorical(x, scheme)
        band = scheme.density(x, out)
        z = band.draw(aux)
        g = grad_cba_categorical(x, out, z, rnd.compare(z), obj, scheme, band).value
        comparisons += rnd.used
        x = project_interval(x - eta(t) * g, lo, hi)
    return _finish(cfg, xs, avgs, comparisons, T, gt, t0, eta, rng)


def run_sgd(
    cfg: SolverConfig,
    dist: Distribution,
    obj: Objective1D,
    gt: Optional[GroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
) -> RunRecord:
    """Full-information projected SGD on revealed samples; the reference method."""
    rng = cfg.rng(rng)
    xi_rng, aux = split_streams(rng)
    t0 = time.perf_counter()
    T, eta = cfg.T, cfg.schedule
    lo, hi = cfg.bounds
    x = float(cfg.x1)
    xs = np.empty(T)
    avgs = np.empty(T)
    avg = 0.0
    for t in range(1, T + 1):
        xs[t - 1] = x
        avg += (x - avg) / t
        avgs[t - 1] = avg
        rnd = begin_round(dist, x, xi_rng, budget=0, baseline=True)
        xi = rnd.reveal_for_baseline()
        g = obj.dx(x, xi) if xi != x else obj.dleft(x)
        x = project_interval(x - eta(t) * g, lo, hi)
    return _finish(cfg, xs, avgs, 0, T, gt, t0, eta, rng)


def _chain_stages(run_stage, x1, plan: StagePlan, horizon, gt):
    """Run the stages of ``plan`` with warm starts; ``horizon`` truncates the total."""
    limit = plan.total if horizon is None else horizon
    xs, avgs = [], []
    outputs = []
    comparisons = samples = 0
    x_hat = x1
    done = 0
    for T_k, schedule in plan.stages:
        if done >= limit:
            break
        T_k = min(T_k, limit - done)
        rec = run_stage(x_hat, T_k, schedule)
        xs.append(rec.iterates)
        avgs.append(rec.averages)
        comparisons += rec.comparisons
        samples += rec.samples
        x_hat = rec.output
        outputs.append(x_hat)
        done += T_k
    xs = np.concatenate(xs)
    avgs = np.concatenate(avgs)
    return RunRecord(
        iterates=xs, averages=avgs, output=x_hat, comparisons=comparisons,
        samples=samples, gaps=_gaps(gt, avgs), stage_outputs=outputs,
    )


def run_mcba(
    x1: float,
    plan: StagePlan,
    dist: Distribution,
    obj: Objective1D,
    bands: BandFamily,
    gt: Optional[GroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
    batch: int = 1,
    horizon: Optional[int] = None,
) -> RunRecord:
    """Restarted CBA; each stage starts at the previous stage's averaged output.

    ``averages`` holds, at each global iteration, the running average of the
    stage in progress.  ``horizon`` stops early, truncating the last stage.
    """
    rng = rng if rng is not None else np.random.default_rng()
    t0 = time.perf_counter()

    def stage(x_hat, T_k, schedule):
        cfg = SolverConfig(x1=x_hat, T=T_k, schedule=schedule, bounds=obj.bounds, batch=batch)
        return run_cba(cfg, dist, obj, bands, None, rng)

    rec = _chain_stages(stage, float(x1), plan, horizon, gt)
    rec.wall_time = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# quadratic problem
# ---------------------------------------------------------------------------


def run_cba_qp(
    cfg: SolverConfig,
    prob: QuadraticProblem,
    radial: RadialDensity,
    gt: Optional[QPGroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
) -> RunRecord:
    """Random-direction comparison method: two value comparisons per sample."""
    rng = cfg.rng(rng)
    xi_rng, aux = split_streams(rng)
    t0 = time.perf_counter()
    T, eta = cfg.T, cfg.schedule
    box = cfg.bounds
    lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    Q, d = prob.Q, prob.dim
    x = np.array(cfg.x1, dtype=float)
    xs = np.empty((T, d))
    avgs = np.empty((T, d))
    avg = np.zeros(d)
    comparisons = 0
    for t in range(1, T + 1):
        xs[t - 1] = x
        avg += (x - avg) / t
        avgs[t - 1] = avg
        rnd = begin_qp_round(prob.dist, x, Q, xi_rng)
        u = sphere_sample(d, aux)
        z = radial.draw(aux)
        pair = rnd.qp_compare_pair(x, u, z)
        winner = x + z * u if pair is PLUS_SMALLER else x - z * u
        le = rnd.qp_compare_winner_vs_center(winner, x)
        comparisons += rnd.used
        if le:
            g = grad_qp(x, u, z, pair, True, float(u @ Q @ u), radial).value
            x = np.minimum(np.maximum(x - eta(t) * g, lo), hi)
    return _finish(cfg, xs, avgs, comparisons, T, gt, t0, eta, rng)


def run_sgd_qp(
    cfg: SolverConfig,
    prob: QuadraticProblem,
    gt: Optional[QPGroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
) -> RunRecord:
    rng = cfg.rng(rng)
    xi_rng, aux = split_streams(rng)
    t0 = time.perf_counter()
    T, eta = cfg.T, cfg.schedule
    lo, hi = np.asarray(cfg.bounds[0], dtype=float), np.asarray(cfg.bounds[1], dtype=float)
    Q, d = prob.Q, prob.dim
    x = np.array(cfg.x1, dtype=float)
    xs = np.empty((T, d))
    avgs = np.empty((T, d))
    avg = np.zeros(d)
    for t in range(1, T + 1):
        xs[t - 1] = x
        avg += (x - avg) / t
        avgs[t - 1] = avg
        rnd = begin_qp_round(prob.dist, x, Q, xi_rng, budget=0, baseline=True)
        xi = rnd.reveal_for_baseline()
        x = np.minimum(np.maximum(x - eta(t) * (Q @ (x - xi)), lo), hi)
    return _finish(cfg, xs, avgs, 0, T, gt, t0, eta, rng)


def run_mcba_qp(
    x1,
    plan: StagePlan,
    prob: QuadraticProblem,
    radial: RadialDensity,
    gt: Optional[QPGroundTruth] = None,
    rng: Optional[np.random.Generator] = None,
    horizon: Optional[int] = None,
) -> RunRecord:
    rng = rng if rng is not None else np.random.default_rng()
    t0 = time.perf_counter()

    def stage(x_hat, T_k, schedule):
        cfg = SolverConfig(x1=np.array(x_hat, dtype=float), T=T_k, schedule=schedule, bounds=prob.box)
        return run_cba_qp(cfg, prob, radial, None, rng)

    rec = _chain_stages(stage, np.array(x1, dtype=float), plan, horizon, gt)
    rec.wall_time = time.perf_counter() - t0
    return rec


def qp_extreme_eigenvalues(Q) -> tuple[float, float]:
    """``(mu, L)``: smallest and largest eigenvalues of a symmetric PD matrix."""
    Q = np.asarray(Q, dtype=float)
    if not np.allclose(Q, Q.T, atol=1e-12):
        raise ValueError("Q must be symmetric")
    eig = np.linalg.eigvalsh(Q)
    if eig[0] <= 0:
        raise ValueError("Q must be positive definite")
    return float(eig[0]), float(eig[-1])


# ---------------------------------------------------------------------------
# non-convex output and stationarity
# ---------------------------------------------------------------------------


def random_index_output(record: RunRecord, schedule: StepSchedule, rng: np.random.Generator):
    """Draw ``t*`` with probability proportional to ``eta_t``; return ``(t*, x_{t*})``."""
    T = record.T
    w = schedule.steps(T)
    p = w / w.sum()
    t_star = int(rng.choice(T, p=p)) + 1
    x = record.iterates[t_star - 1]
    return t_star, (x.copy() if np.ndim(x) else float(x))


@dataclass(frozen=True)
class MoreauParams:
    lam: float
    rho: float

    def __post_init__(self):
        if not (self.lam > 0 and self.rho > 0):
            raise ValueError("lambda and rho must be positive")
        if not self.lam < 1.0 / self.rho:
            raise ValueError(f"need lambda < 1/rho, got lambda={self.lam}, rho={self.rho}")


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def moreau_prox(H, x: float, p: MoreauParams, bounds, grid: int = 256, tol: float = 1e-8) -> float:
    """Minimizer of ``H(y) + (x - y)^2 / (2 lam)`` over the bounds."""
    lo, hi = bounds

    def f(y):
        return float(H(y)) + (x - y) ** 2 / (2.0 * p.lam)

    ys = np.linspace(lo, hi, grid)
    vals = [f(y) for y in ys]
    i = int(np.argmin(vals))
    a = ys[max(i - 1, 0)]
    b = ys[min(i + 1, grid - 1)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    y = 0.5 * (a + b)
    # the grid point itself may beat the bracket interior at a bound
    best = min((ys[i], y), key=f)
    return float(best)


def moreau_stationarity(H, x: float, p: MoreauParams, bounds) -> float:
    """``|x - prox(x)| / lam``, the envelope-gradient magnitude."""
    return abs(x - moreau_prox(H, x, p, bounds)) / p.lam


def moreau_envelope(H, x: float, p: MoreauParams, bounds) -> float:
    y = moreau_prox(H, x, p, bounds)
    return float(H(y)) + (x - y) ** 2 / (2.0 * p.lam)
