"""Parallel trial runner and per-iteration aggregation.

Trials are cut into fixed-size chunks that do not depend on the worker
count.  Each chunk folds its trials in order with Welford updates and the
chunks are merged in order, so the output is bit-identical for any number
of workers.
"""

from __future__ import annotations

import functools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cbopt.errors import CbError
from cbopt.labkit.presets import ExperimentSpec, SeriesSpec
from cbopt.oracle import CategoricalScheme, default_scheme
from cbopt.problems import IsotropicNormal, QuadraticProblem, ground_truth, parse_distribution, parse_objective
from cbopt.rng import QP_MATRIX, RngContract
from cbopt.sampling import band_family, parse_radial
from cbopt.solvers import (
    InvSqrtT,
    SolverConfig,
    StagePlan,
    Strong,
    StrongSmooth,
    qp_extreme_eigenvalues,
    run_cba,
    run_cba_c,
    run_cba_qp,
    run_mcba,
    run_mcba_qp,
    run_sgd,
    run_sgd_qp,
)

CHUNK = 25
ABORT_LIMIT = 0.01


class RunFailure(CbError):
    """More than the allowed fraction of trials aborted."""


@dataclass
class SeriesStats:
    label: str
    mean: np.ndarray
    stderr: np.ndarray
    trials: int
    aborted: int = 0
    wall_time: float = 0.0

    @property
    def T(self) -> int:
        return len(self.mean)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    series: dict  # label -> SeriesStats, in spec order
    trials_requested: int
    wall_time: float = 0.0
    threads: int = 1

    def __getitem__(self, label) -> SeriesStats:
        return self.series[label]

    def labels(self) -> list[str]:
        return list(self.series)


# ---------------------------------------------------------------------------
# per-series setup (built lazily inside each worker)
# ---------------------------------------------------------------------------


def qp_matrix(seed: int, d: int) -> np.ndarray:
    """``Q = Q'^T Q' / d + I`` with standard normal ``Q'`` from the experiment's seed."""
    g = RngContract(seed).stream(QP_MATRIX, d).standard_normal((d, d))
    Q = g.T @ g / d + np.eye(d)
    return 0.5 * (Q + Q.T)


def parse_qp_distribution(ident: str, d: int) -> IsotropicNormal:
    kind, _, args = ident.partition(":")
    if kind != "qp-normal":
        raise ValueError(f"unknown qp distribution {ident!r}; expected qp-normal:<mean>,<sd>")
    mean, sd = (float(v) for v in args.split(","))
    return IsotropicNormal(tuple([mean] * d), sd)


@dataclass
class _Context:
    series: SeriesSpec
    bounds: tuple
    run: object  # (x1, T, rng) -> RunRecord


@functools.lru_cache(maxsize=256)
def _context(series: SeriesSpec, seed: int) -> _Context:
    base = series.base
    if series.is_qp:
        d = series.d
        Q = qp_matrix(seed, d)
        dist = parse_qp_distribution(series.distribution, d)
        box = (np.full(d, 50.0), np.full(d, 150.0))
        prob = QuadraticProblem(Q, dist, box)
        gt = prob.ground_truth()
        mu, L = qp_extreme_eigenvalues(Q)
        sched = StrongSmooth(mu, L)
        if base == "sgd-qp":
            def run(x1, T, rng):
                return run_sgd_qp(SolverConfig(x1=x1, T=T, schedule=sched, bounds=box), prob, gt, rng)
        else:
            radial = parse_radial(series.radial)
            if base == "cba-qp":
                def run(x1, T, rng):
                    return run_cba_qp(SolverConfig(x1=x1, T=T, schedule=sched, bounds=box), prob, radial, gt, rng)
            else:
                def run(x1, T, rng):
                    plan = StagePlan.covering(T, "B", mu, L)
                    return run_mcba_qp(x1, plan, prob, radial, gt, rng, horizon=T)
        return _Context(series, box, run)

    obj = parse_objective(series.objective)
    dist = parse_distribution(series.distribution)
    gt = ground_truth(obj, dist)
    bounds = obj.bounds
    mu = series.mu
    if base in ("cba", "cbastc", "mcba"):
        fam = band_family(series.band, obj, dist)
        S = series.batch
        if base == "mcba":
            def run(x1, T, rng):
                return run_mcba(x1, StagePlan.covering(T, "A", mu), dist, obj, fam, gt, rng, batch=S, horizon=T)
        else:
            sched = InvSqrtT() if base == "cba" else Strong(mu)

            def run(x1, T, rng):
                return run_cba(SolverConfig(x1=x1, T=T, schedule=sched, bounds=bounds, batch=S), dist, obj, fam, gt, rng)
    elif base == "cba-c":
        arg = series.algorithm.partition(":")[2]
        if series.thresholds is not None:
            scheme = CategoricalScheme(series.thresholds)
        else:
            scheme = default_scheme(int(arg) if arg else 3)
        sched = InvSqrtT()

        def run(x1, T, rng):
            return run_cba_c(SolverConfig(x1=x1, T=T, schedule=sched, bounds=bounds), dist, obj, scheme, gt, rng)
    elif base in ("sgd", "sgdstc"):
        sched = InvSqrtT() if base == "sgd" else Strong(mu)

        def run(x1, T, rng):
            return run_sgd(SolverConfig(x1=x1, T=T, schedule=sched, bounds=bounds), dist, obj, gt, rng)
    else:
        raise ValueError(f"algorithm {series.algorithm!r} needs a qp series")
    return _Context(series, bounds, run)


def check_series(spec: ExperimentSpec) -> None:
    """Resolve every id up front so configuration errors surface before any work."""
    for s in spec.series:
        _context(s, spec.seed)


def initial_point(contract: RngContract, trial: int, bounds, d: int):
    """``x_1`` uniform in the box; shared by every series of a trial."""
    rng = contract.init_stream(trial, d)
    lo, hi = bounds
    if d == 1 and np.ndim(lo) == 0:
        return float(rng.uniform(lo, hi))
    return rng.uniform(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))


# ---------------------------------------------------------------------------
# chunk execution and merging
# ---------------------------------------------------------------------------


@dataclass
class _Acc:
    n: int = 0
    mean: Optional[np.ndarray] = None
    m2: Optional[np.ndarray] = None
    aborted: int = 0
    wall: float = 0.0

    def push(self, x: np.ndarray):
        self.n += 1
        if self.mean is None:
            self.mean = x.astype(float).copy()
            self.m2 = np.zeros_like(self.mean)
            return
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other: "_Acc"):
        self.aborted += other.aborted
        self.wall += other.wall
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        self.n = n


def _run_chunk(spec: ExperimentSpec, start: int, stop: int) -> list[_Acc]:
    contract = RngContract(spec.seed)
    accs = [_Acc() for _ in spec.series]
    for trial in range(start, stop):
        x1_cache = {}
        for k, s in enumerate(spec.series):
            ctx = _context(s, spec.seed)
            key = (s.d, ctx.bounds[0] if s.d == 1 else 0)
            if key not in x1_cache:
                x1_cache[key] = initial_point(contract, trial, ctx.bounds, s.d)
            x1 = x1_cache[key]
            t0 = time.perf_counter()
            try:
                rec = ctx.run(x1, spec.T, contract.trial_stream(trial, k))
            except (CbError, FloatingPointError, ValueError):
                accs[k].aborted += 1
                continue
            finally:
                accs[k].wall += time.perf_counter() - t0
            gaps = rec.gaps
            if gaps is None or not np.all(np.isfinite(gaps)):
                accs[k].aborted += 1
                continue
            accs[k].push(gaps)
    return accs


def _chunks(trials: int, size: int = CHUNK):
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def run_experiment(
    spec: ExperimentSpec,
    *,
    trials: Optional[int] = None,
    T: Optional[int] = None,
    threads: int = 1,
    seed: Optional[int] = None,
) -> ExperimentResult:
    """Run every series of ``spec`` and aggregate the relative gap per iteration."""
    spec = spec.with_overrides(trials=trials, T=T, seed=seed)
    n_trials = spec.trials
    if threads < 1:
        raise ValueError("threads must be at least 1")
    check_series(spec)
    t0 = time.perf_counter()
    parts = _chunks(n_trials)
    if threads == 1 or len(parts) == 1:
        results = [_run_chunk(spec, a, b) for a, b in parts]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(_run_chunk, spec, a, b) for a, b in parts]
            results = [f.result() for f in futs]
    total = [_Acc() for _ in spec.series]
    for accs in results:
        for acc, part in zip(total, accs):
            acc.merge(part)
    out = {}
    for s, acc in zip(spec.series, total):
        if acc.aborted > ABORT_LIMIT * n_trials or acc.n == 0:
            raise RunFailure(f"series {s.label}: {acc.aborted} of {n_trials} trials aborted")
        if acc.n > 1:
            sd = np.sqrt(acc.m2 / (acc.n - 1))
        else:
            sd = np.zeros_like(acc.mean)
        out[s.label] = SeriesStats(s.label, acc.mean, sd / math.sqrt(acc.n), acc.n, acc.aborted, acc.wall)
    return ExperimentResult(spec, out, n_trials, time.perf_counter() - t0, threads)
