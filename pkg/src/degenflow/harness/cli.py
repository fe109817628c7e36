"""Command line entry point: ``degenflow run|preset|validate|compare|report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..grid import Trajectory
from ..model import RegimeError
from .config import ConfigError, load_config
from .presets import PRESET_NAMES, preset, preset_text
from .runner import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_STRUCTURE,
    compare,
    run_experiment,
    validation_report,
)


def _print_result(res) -> int:
    if res.message:
        print(res.message, file=sys.stderr)
    print((res.out_dir / "summary.txt").read_text(), end="")
    print(f"artifacts: {res.out_dir}")
    return res.exit_code


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        return _print_result(run_experiment(cfg, args.out))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def _cmd_preset(args) -> int:
    try:
        if args.emit_config:
            print(preset_text(args.name), end="")
            return EXIT_OK
        return _print_result(run_experiment(preset(args.name), args.out))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = validation_report(cfg)
    except RegimeError as err:
        print(f"structure rejected: {err}", file=sys.stderr)
        return EXIT_STRUCTURE
    print(report.to_json())
    return EXIT_OK if report.passed or cfg.waive_validation else EXIT_STRUCTURE


def _load_traj(path) -> Trajectory:
    p = Path(path)
    if (p / "trajectory" / "meta.json").exists():
        p = p / "trajectory"
    return Trajectory.load(p)


def _cmd_compare(args) -> int:
    try:
        result = compare(_load_traj(args.a), _load_traj(args.b), args.norm)
    except (OSError, ValueError) as err:
        print(f"compare failed: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(result.to_csv(), end="")
    flag = " (nearest-snapshot matching)" if result.nearest_snapshot else ""
    print(f"# max {result.norm} error {result.max_error:.17g}{flag}", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args) -> int:
    d = Path(args.dir)
    summary = d / "summary.json"
    if summary.exists():
        data = json.loads(summary.read_text())
        print(f"experiment {data['experiment']}")
        for c in data["checks"]:
            print(f"{c['status']:8s} {c['name']}: {c['value']}")
        return EXIT_OK
    text = d / "summary.txt"
    if text.exists():
        print(text.read_text(), end="")
        return EXIT_OK
    print(f"no summary in {d}", file=sys.stderr)
    return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="degenflow", description="Coupled degenerate/singular diffusion experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="experiment INI file")
    r.add_argument("--out", help="artifact directory (default $DEGENFLOW_OUT/<name>)")
    r.set_defaults(func=_cmd_run)

    pr = sub.add_parser("preset", help="run a named preset or print its config")
    pr.add_argument("name", help=", ".join(PRESET_NAMES))
    pr.add_argument("--emit-config", action="store_true", help="print the config instead of running it")
    pr.add_argument("--out", help="artifact directory (default $DEGENFLOW_OUT/<name>)")
    pr.set_defaults(func=_cmd_preset)

    v = sub.add_parser("validate", help="check the structure conditions of a config")
    v.add_argument("config", help="experiment INI file")
    v.set_defaults(func=_cmd_validate)

    c = sub.add_parser("compare", help="per-snapshot error between two runs")
    c.add_argument("a", help="run directory or trajectory directory")
    c.add_argument("b", help="run directory or trajectory directory")
    c.add_argument("--norm", choices=("l1", "linf"), default="l1")
    c.set_defaults(func=_cmd_compare)

    rep = sub.add_parser("report", help="print the summary of a run directory")
    rep.add_argument("dir", help="run directory written by run or preset")
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
