"""Command line entry point.

Exit codes: 0 success, 1 usage, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import load_config, load_params, load_sidecar, parse_seeds
from .detectors import DetectorParams
from .errors import ConfigError, ReciprosimError, ValidationError
from .events import read_log
from .experiments import run_experiment
from .reports import render_decimal, summarize
from .world import replay

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "RECIPROSIM_OUT"
DEFAULT_OUT = "reciprosim-out"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2; usage is 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reciprosim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config over its seeds")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    r.add_argument("--seeds", help="override the seed list: 7, 1..20 or 1,2,5")
    r.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    a = sub.add_parser("analyze", help="report macrostates found in a log")
    a.add_argument("log")
    a.add_argument("--control", help="giving-disabled twin log, enables the buffering index")
    a.add_argument("--params", help="config file with [detector] (and optionally [scenario])")
    a.add_argument("--format", choices=("text", "csv"), default="text")

    v = sub.add_parser("validate", help="check a config file")
    v.add_argument("config")

    sub.add_parser("version", help="print the version")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "validate":
            return _cmd_validate(args)
        print(f"reciprosim {__version__}")
        return EXIT_OK
    except ValidationError as exc:
        print("config error:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReciprosimError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _cmd_run(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        print("reciprosim run: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    spec = load_config(args.config)
    if args.seeds:
        try:
            spec.seeds = parse_seeds(args.seeds)
        except ValueError as exc:
            print(f"reciprosim run: error: --seeds: {exc}", file=sys.stderr)
            return EXIT_USAGE
    out = Path(args.out or spec.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    result = run_experiment(spec, out, jobs=args.jobs)

    print(f"{spec.scenario.kind}: {len(spec.seeds)} seeds -> {out}")
    for control, comps in result.comparisons.items():
        print(f"treatment vs {control} (wins/losses/ties, median difference):")
        for pc in comps:
            if pc.wins or pc.losses:
                print(f"  {pc.metric}: {pc.wins}/{pc.losses}/{pc.ties}, "
                      f"{render_decimal(pc.median_diff)}")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    log_path = Path(args.log)
    params, config = DetectorParams(), None
    if args.params:
        params, config = load_params(args.params)
    if config is None:
        sidecar = log_path.with_suffix(".cfg")
        if not sidecar.exists():
            raise ConfigError(
                f"no scenario for {log_path}: pass --params with a [scenario] section "
                f"or keep {sidecar.name} next to the log"
            )
        config = load_sidecar(sidecar)
    log = read_log(log_path)
    control = read_log(args.control) if args.control else None
    # replay first: a log that breaks conservation is not worth reporting on
    replay(log, config)
    report = summarize(log, control, params, config)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    spec = load_config(args.config)
    controls = ", ".join(spec.controls) or "none"
    print(f"ok: {spec.scenario.kind}, {len(spec.seeds)} seeds, controls: {controls}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
