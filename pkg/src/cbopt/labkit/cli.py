"""Command-line entry point: ``cbopt run | list-presets | verify``.

Exit codes: 0 ok, 1 usage error, 2 run failure, 3 verify failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from cbopt.errors import CbError
from cbopt.labkit.output import plot_svg, write_csv, write_meta
from cbopt.labkit.presets import DESCRIPTIONS, load_config, preset, preset_names
from cbopt.labkit.runner import run_experiment
from cbopt.labkit.verify import verify

EXIT_OK, EXIT_USAGE, EXIT_RUN, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cbopt", description="Comparison-based stochastic optimization experiments.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="run a preset or a JSON-configured experiment")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="built-in preset name (see list-presets)")
    src.add_argument("--config", help="JSON experiment config")
    run.add_argument("--trials", type=int, help="number of trials (default: desk scale, 200)")
    run.add_argument("--iters", type=int, help="iterations per trial (default: preset T)")
    run.add_argument("--seed", type=int, help="base seed (default 7)")
    run.add_argument("--threads", type=int, default=1, help="worker processes")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--svg", help="optional SVG plot path")

    sub.add_parser("list-presets", help="list built-in presets")

    ver = sub.add_parser("verify", help="run the self-check suites")
    ver.add_argument("--quick", action="store_true", help="smaller sample counts")
    ver.add_argument("--seed", type=int, default=7)
    return p


def _run(args) -> int:
    try:
        if args.preset:
            spec = preset(args.preset)
            trials = args.trials if args.trials is not None else spec.desk_trials
        else:
            spec = load_config(args.config)
            trials = args.trials if args.trials is not None else spec.trials
    except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"cbopt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if trials < 1 or (args.iters is not None and args.iters < 1) or args.threads < 1:
        print("cbopt: trials, iters and threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_experiment(spec, trials=trials, T=args.iters, threads=args.threads, seed=args.seed)
        write_csv(result, args.out)
        write_meta(result, args.out)
        if args.svg:
            plot_svg(result, args.svg)
    except (CbError, ValueError, OSError) as exc:
        print(f"cbopt: run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    for label, st in result.series.items():
        print(f"{label}: final mean gap {st.mean[-1]:.6g} (stderr {st.stderr[-1]:.2g}, trials {st.trials})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        for name in preset_names():
            print(f"{name:7s} {DESCRIPTIONS[name]}")
        return EXIT_OK
    if args.command == "verify":
        return EXIT_OK if verify(quick=args.quick, seed=args.seed) else EXIT_VERIFY
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
