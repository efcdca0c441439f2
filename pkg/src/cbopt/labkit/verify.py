"""Self-check suites run by ``cbopt verify``.

Each suite returns a :class:`SuiteResult` with its sample count and
tolerance, so the report says how strong every check was.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from cbopt.estimators import grad_cba
from cbopt.oracle import SAMPLE_BELOW, begin_round
from cbopt.problems import ABOVE, BELOW, Mixture, Uniform, ground_truth, h1, parse_distribution
from cbopt.rng import VERIFY, RngContract
from cbopt.sampling import SamplingDensity, band_family, make_exponential_band, make_optimal_band, make_uniform_band
from cbopt.solvers import InvSqrtT, StagePlan, StrongSmooth, Strong, step_size


@dataclass
class SuiteResult:
    name: str
    passed: bool
    samples: int
    tolerance: str
    details: list = field(default_factory=list)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: samples={self.samples} tolerance={self.tolerance}"


class ScaledDensity(SamplingDensity):
    """Reports ``scale * pdf`` while drawing from the wrapped density; a fault hook."""

    def __init__(self, inner: SamplingDensity, scale: float):
        self.inner = inner
        self.scale = scale
        self.side = inner.side
        self.anchor = inner.anchor

    def pdf(self, z):
        return self.scale * self.inner.pdf(z)

    def draw(self, rng):
        return self.inner.draw(rng)

    @property
    def support(self):
        return self.inner.support


def sample_estimates(obj, dist, bands, x: float, n: int, rng, pdf_scale: float = 1.0) -> np.ndarray:
    """``n`` independent comparison-based estimates of ``H'(x)``."""
    out = np.empty(n)
    for i in range(n):
        rnd = begin_round(dist, x, rng)
        first = rnd.compare(x)
        band = bands(x, BELOW if first is SAMPLE_BELOW else ABOVE)
        if pdf_scale != 1.0:
            band = ScaledDensity(band, pdf_scale)
        z = band.draw(rng)
        out[i] = grad_cba(x, first, z, rnd.compare(z), obj, band).value
    return out


def qp_estimates(x, xi, Q, radial, us: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Vectorized QP rounds for a fixed hidden ``xi``; row ``i`` uses ``us[i]``, ``zs[i]``.

    Mirrors the two value comparisons and the estimator one round at a time,
    so it agrees with the scalar path sample by sample.
    """
    Q = np.asarray(Q, dtype=float)
    D = np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)

    def h(V):
        return 0.5 * np.einsum("ij,jk,ik->i", V, Q, V)

    zu = zs[:, None] * us
    plus = h(D + zu) < h(D - zu)
    W = np.where(plus[:, None], D + zu, D - zu)
    keep = h(W) <= 0.5 * float(D @ Q @ D)
    p = np.array([radial.pdf(float(z)) for z in zs])
    mag = 0.5 * np.einsum("ij,jk,ik->i", us, Q, us) / p
    mag = np.where(plus, -mag, mag) * keep
    return mag[:, None] * us


def sphere_rows(n: int, d: int, rng) -> np.ndarray:
    """``n`` directions uniform on the sphere of radius ``sqrt(d)``."""
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True) * math.sqrt(d)


UNBIASED_CASES = (
    ("h1", "uniform:50,150", "uniform", 120.0),
    ("h1", "normal:100,100", "exp:0.0625", 110.0),
    ("h2", "uniform:50,150", "uniform", 105.0),
    ("h2", "normal:100,100", "exp:0.0625", 105.0),
)


def suite_unbiasedness(n: int, seed: int, pdf_scale: float = 1.0) -> SuiteResult:
    from cbopt.problems import parse_objective

    ok = True
    details = []
    for i, (oid, did, sel, x) in enumerate(UNBIASED_CASES):
        obj, dist = parse_objective(oid), parse_distribution(did)
        target = float(ground_truth(obj, dist).Hprime(x))
        g = sample_estimates(obj, dist, band_family(sel, obj, dist), x, n, RngContract(seed).stream(VERIFY, 0, i), pdf_scale)
        se = g.std(ddof=1) / math.sqrt(n)
        z = (g.mean() - target) / se
        good = abs(z) <= 3.0
        ok &= good
        details.append(f"{oid}/{did}/{sel} x={x:g}: mean={g.mean():.4f} H'={target:.4f} z={z:+.2f}")
    return SuiteResult("unbiasedness", ok, n * len(UNBIASED_CASES), "|mean - H'| <= 3 stderr", details)


def suite_normalization() -> SuiteResult:
    from scipy.integrate import quad

    obj = h1()
    dists = (Uniform(50.0, 150.0), parse_distribution("normal:100,100"))
    densities = []
    for x in (50.0, 80.0, 120.0, 150.0):
        for side in (BELOW, ABOVE):
            densities.append(make_uniform_band(x, 50.0, 150.0, side))
            densities.append(make_exponential_band(x, 0.0625, side))
            for dist in dists:
                try:
                    densities.append(make_optimal_band(dist, obj, x, side))
                except Exception:
                    pass  # no mass on that side
    ok = True
    details = []
    worst = 0.0
    for dens in densities:
        lo, hi = dens.support
        if hasattr(dens, "grid"):
            total = float(np.sum(dens._dens * np.diff(dens.grid)))
        else:
            pts = [p for p in (lo, hi) if math.isfinite(p)]
            a = lo if math.isfinite(lo) else pts[0] - 2000.0
            b = hi if math.isfinite(hi) else pts[0] + 2000.0
            total = quad(dens.pdf, a, b, limit=200, epsabs=1e-12)[0]
        err = abs(total - 1.0)
        worst = max(worst, err)
        wrong_side = dens.pdf(dens.anchor + 1.0) if dens.side == BELOW else dens.pdf(dens.anchor - 1.0)
        ok &= err <= 1e-6 and wrong_side == 0.0
    details.append(f"{len(densities)} densities, worst |integral - 1| = {worst:.2e}")
    return SuiteResult("normalization", ok, len(densities), "|integral - 1| <= 1e-6; zero mass on the wrong side", details)


def suite_indistinguishability(n: int, seed: int) -> SuiteResult:
    F1 = Mixture((Uniform(-3.0, -2.0), Uniform(2.0, 3.0)), (0.5, 0.5))
    F2 = Mixture((Uniform(-3.0, -2.0), Uniform(3.0, 4.0)), (0.5, 0.5))
    tol = 3.0 * math.sqrt(0.25 / n)
    ok = True
    details = []
    for j, (name, dist) in enumerate((("F1", F1), ("F2", F2))):
        for i, x in enumerate((-1.0, -0.5, 0.0, 0.5, 1.0)):
            rng = RngContract(seed).stream(VERIFY, 1, j, i)
            below = 0
            for _ in range(n):
                if begin_round(dist, x, rng, budget=1).compare(x) is SAMPLE_BELOW:
                    below += 1
            freq = below / n
            ok &= abs(freq - 0.5) <= tol
            details.append(f"{name} x={x:+.1f}: P(below)={freq:.4f}")
    return SuiteResult("indistinguishability", ok, 10 * n, f"|freq - 0.5| <= {tol:.4g}", details)


def suite_schedules() -> SuiteResult:
    checks = [
        (step_size(InvSqrtT(), 4), 0.5),
        (step_size(Strong(0.5), 10), 0.2),
        (step_size(StrongSmooth(1.0, 3.0), 2), 0.2),
        (StagePlan(3, "A", 0.5).total, 112),
        (StagePlan(2, "B", 0.5, 1.0).total, 56),
    ]
    ok = all(a == b for a, b in checks)
    return SuiteResult("schedules", ok, len(checks), "exact", [f"{a} == {b}" for a, b in checks])


def suite_slopes(trials: int, seed: int) -> SuiteResult:
    from cbopt.labkit.presets import preset
    from cbopt.labkit.runner import run_experiment

    spec = preset("fig1a")
    spec = type(spec)(spec.name, tuple(s for s in spec.series if s.label in ("cba", "cbastc")))
    res = run_experiment(spec, trials=trials, seed=seed)
    bands = {"cbastc": (-1.6, -0.5), "cba": (-1.2, -0.3)}
    ok = True
    details = []
    for label, (lo, hi) in bands.items():
        s = log_slope(res[label].mean, 50, 500)
        ok &= lo <= s <= hi
        details.append(f"{label}: slope {s:.3f} in [{lo}, {hi}]")
    return SuiteResult("slopes", ok, trials * 2, "slope bands [-1.6,-0.5] / [-1.2,-0.3]", details)


def log_slope(mean_gap: np.ndarray, t0: int, t1: int) -> float:
    """Least-squares slope of log10 mean gap against log10 t over ``[t0, t1]``."""
    t = np.arange(t0, t1 + 1)
    return float(np.polyfit(np.log10(t), np.log10(mean_gap[t0 - 1:t1]), 1)[0])


def verify(quick: bool = False, seed: int = 7, pdf_scale: float = 1.0, out: Callable[[str], None] = print) -> bool:
    """Run all suites; ``pdf_scale != 1`` mis-scales every density as an injected fault."""
    n_unb = 20_000 if quick else 200_000
    n_ind = 20_000 if quick else 100_000
    trials = 100 if quick else 1000
    suites = [
        suite_unbiasedness(n_unb, seed, pdf_scale),
        suite_normalization(),
        suite_indistinguishability(n_ind, seed),
        suite_schedules(),
        suite_slopes(trials, seed),
    ]
    for s in suites:
        out(s.line())
        for d in s.details:
            out(f"    {d}")
    ok = all(s.passed for s in suites)
    out("verify: all suites passed" if ok else "verify: FAILED")
    return ok
