"""Command-line entry point.

    featlearn run <config.json> [--assert]
    featlearn list
    featlearn check-oracles [--assert]
    featlearn plot <report.json>

Exit codes: 0 success, 2 configuration error, 3 a threshold check failed
while ``--assert`` was given.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .harness import (
    DESCRIPTIONS,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    mds_title,
    render_report,
    run_experiment,
)
from .svgplot import ScatterColoring, emit_svg_scatter
from .diagnostics import Embedding2D

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 2, 3


def _load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def _finish(reports, do_assert):
    failed = False
    for rep in reports:
        print(render_report(rep), end="")
        failed |= not rep.passed
    return EXIT_ASSERT if (do_assert and failed) else EXIT_OK


def cmd_run(args):
    cfg = _load_config(args.config)
    return _finish([run_experiment(cfg)], args.do_assert)


def cmd_list(args):
    width = max(map(len, DESCRIPTIONS))
    for name, text in DESCRIPTIONS.items():
        print(f"{name.ljust(width)}  {text}")
    return EXIT_OK


def cmd_check_oracles(args):
    reports = [
        run_experiment(ExperimentConfig.defaults("gstar_check")),
        run_experiment(ExperimentConfig.defaults("sq_check")),
        run_experiment(ExperimentConfig.defaults("gradient_oracle")),
    ]
    return _finish(reports, args.do_assert)


def _read_embedding(path):
    pts, colors, stars = [], [], []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            xy = (float(row["x"]), float(row["y"]))
            if row["index"].startswith("star"):
                stars.append(xy)
            else:
                pts.append(xy)
                colors.append(row["color"])
    return Embedding2D(np.array(pts), float("nan")), ScatterColoring(colors, tuple(stars))


def cmd_plot(args):
    try:
        rep = ExperimentReport.load(args.report)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    print(render_report(rep), end="")
    base = os.path.dirname(os.path.abspath(args.report))
    for art in rep.artifacts:
        name = os.path.basename(art)
        if "_mds_" in name and name.endswith(".csv"):
            src = os.path.join(base, art)
            emb, col = _read_embedding(src)
            out = src[:-4] + ".svg"
            emit_svg_scatter(emb, col, out, mds_title(name[:-4].split("_mds_", 1)[1]))
            print(f"wrote {out}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="featlearn", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--assert", dest="do_assert", action="store_true",
                   help="exit with status 3 if any threshold check fails")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("list", help="list experiment names")
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("check-oracles", help="run the constructive and enumeration checks")
    p.add_argument("--assert", dest="do_assert", action="store_true")
    p.set_defaults(func=cmd_check_oracles)
    p = sub.add_parser("plot", help="print a report's table and redraw its SVG scatters")
    p.add_argument("report")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
