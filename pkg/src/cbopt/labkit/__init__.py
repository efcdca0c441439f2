"""Experiment presets, parallel runner, output writers and the CLI."""

from cbopt.labkit.output import plot_svg, read_csv, write_csv, write_meta
from cbopt.labkit.presets import ExperimentSpec, SeriesSpec, load_config, preset, preset_names, spec_from_config
from cbopt.labkit.runner import ExperimentResult, RunFailure, SeriesStats, run_experiment

__all__ = [
    "ExperimentResult", "ExperimentSpec", "RunFailure", "SeriesSpec", "SeriesStats",
    "load_config", "plot_svg", "preset", "preset_names", "read_csv", "run_experiment",
    "spec_from_config", "write_csv", "write_meta",
]
