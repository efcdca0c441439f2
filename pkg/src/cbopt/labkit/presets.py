"""Experiment specifications and the built-in presets.

A spec is a list of series.  Each series is one curve: an algorithm run on
one (objective, distribution) instance with its own sampling choices.  The
series label is what appears in the ``algorithm`` column of the CSV.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

ALGORITHMS = ("cba", "cbastc", "mcba", "cba-c", "cba-qp", "mcba-qp", "sgd", "sgdstc", "sgd-qp")

DEFAULT_MU = 0.5
DEFAULT_T = 500
FULL_TRIALS = 2000
DESK_TRIALS = 200
DEFAULT_SEED = 7
DEFAULT_LAM = 0.0625


@dataclass(frozen=True)
class SeriesSpec:
    """One curve.  ``algorithm`` may carry an argument, as in ``"cba-c:5"``."""

    label: str
    algorithm: str
    objective: str = "h1"
    distribution: str = "uniform:50,150"
    band: str = "uniform"
    batch: int = 1
    mu: float = DEFAULT_MU
    thresholds: Optional[tuple] = None
    d: int = 1
    radial: str = "rexp:0.0625"

    def __post_init__(self):
        base = self.algorithm.partition(":")[0]
        if base not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.batch < 1:
            raise ValueError("batch size must be at least 1")
        if self.is_qp and self.d < 1:
            raise ValueError("qp dimension must be at least 1")
        if "," in self.label or "\n" in self.label:
            raise ValueError(f"series label may not contain commas or newlines: {self.label!r}")

    @property
    def base(self) -> str:
        return self.algorithm.partition(":")[0]

    @property
    def is_qp(self) -> bool:
        return self.base in ("cba-qp", "mcba-qp", "sgd-qp")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    series: tuple
    T: int = DEFAULT_T
    trials: int = FULL_TRIALS
    desk_trials: int = DESK_TRIALS
    seed: int = DEFAULT_SEED
    declared: tuple = ()  # numeric choices not stated in the source text

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.trials < 1 or self.desk_trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.series:
            raise ValueError("an experiment needs at least one series")
        labels = [s.label for s in self.series]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate series labels in {self.name}")

    def with_overrides(self, *, trials=None, T=None, seed=None) -> "ExperimentSpec":
        kw = {}
        if trials is not None:
            kw["trials"] = int(trials)
            kw["desk_trials"] = int(trials)
        if T is not None:
            kw["T"] = int(T)
        if seed is not None:
            kw["seed"] = int(seed)
        return replace(self, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["series"] = [asdict(s) for s in self.series]
        out["declared"] = list(self.declared)
        return out


# ---------------------------------------------------------------------------
# the four one-dimensional instances
# ---------------------------------------------------------------------------

INSTANCES = {
    "a": ("h1", "uniform:50,150", "uniform"),
    "b": ("h1", "normal:100,100", "exp:0.0625"),
    "c": ("h2", "uniform:50,150", "uniform"),
    "d": ("h2", "normal:100,100", "exp:0.0625"),
}

FIG1_ALGORITHMS = ("cba", "cbastc", "mcba", "sgd", "sgdstc")


def _fig1(key: str) -> ExperimentSpec:
    obj, dist, band = INSTANCES[key]
    series = tuple(SeriesSpec(a, a, obj, dist, band) for a in FIG1_ALGORITHMS)
    return ExperimentSpec(f"fig1{key}", series)


def _fig2() -> ExperimentSpec:
    series = []
    for obj in ("h1", "h2"):
        for k in range(-8, 2):
            lam = 2.0 ** k
            for a in ("cba", "cbastc", "mcba"):
                series.append(SeriesSpec(f"{a}/{obj}/lam=2^{k}", a, obj, "normal:100,100", f"exp:{lam!r}"))
    return ExperimentSpec("fig2", tuple(series), declared=("lambda sweep 2^-8..2^1",))


def _fig3() -> ExperimentSpec:
    series = []
    for tag, dist in (("uniform", "uniform:50,150"), ("normal", "normal:100,100")):
        series.append(SeriesSpec(f"cba/{tag}/exp", "cba", "h1", dist, "exp:0.0625"))
        series.append(SeriesSpec(f"cba/{tag}/optimal", "cba", "h1", dist, "optimal"))
    return ExperimentSpec("fig3", tuple(series))


FIG4_BATCHES = (1, 2, 5, 10, 100)


def _fig4() -> ExperimentSpec:
    series = []
    for key, (obj, dist, band) in INSTANCES.items():
        for S in FIG4_BATCHES:
            series.append(SeriesSpec(f"cba/{key}/S={S}", "cba", obj, dist, band, batch=S))
    return ExperimentSpec("fig4", tuple(series))


def _fig5() -> ExperimentSpec:
    series = []
    for d in (5, 20):
        for a in ("sgd-qp", "cba-qp", "mcba-qp"):
            series.append(SeriesSpec(f"{a}/d={d}", a, "qp", "qp-normal:100,50", "none", d=d, radial="rexp:0.0625"))
    return ExperimentSpec("fig5", tuple(series), T=2000)


def _figE() -> ExperimentSpec:
    series = []
    for key, (obj, dist, band) in INSTANCES.items():
        series.append(SeriesSpec(f"sgd/{key}", "sgd", obj, dist, band))
        series.append(SeriesSpec(f"cba/{key}", "cba", obj, dist, band))
        for m in (3, 5):
            series.append(SeriesSpec(f"cba-c:{m}/{key}", f"cba-c:{m}", obj, dist, band))
    return ExperimentSpec(
        "figE", tuple(series),
        declared=("theta m=3 (0,3,7,inf)", "theta m=5 (0,2,4,7,12,inf)"),
    )


_BUILDERS = {
    "fig1a": lambda: _fig1("a"),
    "fig1b": lambda: _fig1("b"),
    "fig1c": lambda: _fig1("c"),
    "fig1d": lambda: _fig1("d"),
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "figE": _figE,
}

DESCRIPTIONS = {
    "fig1a": "h1, U[50,150], uniform bands: CBA, CBAstc, MCBA, SGD, SGDstc",
    "fig1b": "h1, N(100,100), exp(0.0625) bands: CBA, CBAstc, MCBA, SGD, SGDstc",
    "fig1c": "h2, U[50,150], uniform bands: CBA, CBAstc, MCBA, SGD, SGDstc",
    "fig1d": "h2, N(100,100), exp(0.0625) bands: CBA, CBAstc, MCBA, SGD, SGDstc",
    "fig2": "exponential rate sweep 2^-8..2^1 for CBA, CBAstc, MCBA under N(100,100)",
    "fig3": "CBA with exponential vs optimal bands, h1, both laws",
    "fig4": "CBA mini-batch S in {1,2,5,10,100} on the four instances",
    "fig5": "quadratic program, d in {5,20}, T=2000: SGD, CBA-QP, MCBA-QP",
    "figE": "categorical CBA-C with m in {3,5} against CBA and SGD",
}


def preset_names() -> list[str]:
    return list(_BUILDERS)


def preset(name: str) -> ExperimentSpec:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(_BUILDERS)}") from None


# ---------------------------------------------------------------------------
# JSON configs for custom experiments
# ---------------------------------------------------------------------------

_SERIES_KEYS = {f for f in SeriesSpec.__dataclass_fields__}
_SPEC_KEYS = {"name", "series", "T", "trials", "seed", "declared", "preset"}


def spec_from_config(cfg: dict) -> ExperimentSpec:
    """Build a spec from the JSON config format documented in the README.

    Top-level keys: ``name``, ``T``, ``trials``, ``seed``, ``series``, and
    optionally ``preset`` to start from a built-in and override fields.
    Series keys mirror :class:`SeriesSpec`; ``label`` defaults to the
    algorithm id.  Keys common to every series may also be set at the top
    level under ``defaults``.
    """
    unknown = set(cfg) - _SPEC_KEYS - {"defaults"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "preset" in cfg:
        base = preset(cfg["preset"])
        series = base.series
        name = cfg.get("name", base.name)
        declared = base.declared
    else:
        series = ()
        name = cfg.get("name", "custom")
        declared = ()
    if "series" in cfg:
        defaults = cfg.get("defaults", {})
        out = []
        for raw in cfg["series"]:
            entry = {**defaults, **raw}
            bad = set(entry) - _SERIES_KEYS
            if bad:
                raise ValueError(f"unknown series keys: {sorted(bad)}")
            if "algorithm" not in entry:
                raise ValueError("every series needs an algorithm")
            entry.setdefault("label", entry["algorithm"])
            if entry.get("thresholds") is not None:
                entry["thresholds"] = tuple(math.inf if t in ("inf", None) else float(t) for t in entry["thresholds"])
            out.append(SeriesSpec(**entry))
        series = tuple(out)
    trials = int(cfg.get("trials", DESK_TRIALS))
    spec = ExperimentSpec(
        name=name,
        series=series,
        T=int(cfg.get("T", DEFAULT_T if "preset" not in cfg else base.T)),
        trials=trials,
        desk_trials=trials,
        seed=int(cfg.get("seed", DEFAULT_SEED)),
        declared=tuple(cfg.get("declared", declared)),
    )
    return spec


def load_config(path) -> ExperimentSpec:
    with open(path) as fh:
        return spec_from_config(json.load(fh))
