"""Run named experiments with their default configs and print each report.

    python scripts/run_all.py                     # every experiment
    python scripts/run_all.py parity interval     # a subset
    python scripts/run_all.py --seeds 0 codebook  # override the seed list

Output goes to ``$FEATLEARN_OUT`` (or ``--out``), one directory per experiment.
"""
import argparse
import os
import sys
import time

from featlearn.harness import DEFAULTS, ExperimentConfig, render_report, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("names", nargs="*", help=f"subset of: {', '.join(DEFAULTS)}")
    ap.add_argument("--out", default=None, help="output root (overrides $FEATLEARN_OUT)")
    ap.add_argument("--seeds", type=int, nargs="+", default=None)
    args = ap.parse_args(argv)
    names = args.names or list(DEFAULTS)
    unknown = [n for n in names if n not in DEFAULTS]
    if unknown:
        ap.error(f"unknown experiments: {unknown}")
    if args.out:
        os.environ["FEATLEARN_OUT"] = args.out
    failed = []
    for name in names:
        cfg = ExperimentConfig.defaults(name)
        if args.seeds is not None:
            cfg = cfg.with_overrides(seeds=tuple(args.seeds))
        t0 = time.perf_counter()
        rep = run_experiment(cfg)
        print(render_report(rep), end="")
        print(f"({time.perf_counter() - t0:.0f} s)\n", flush=True)
        if not rep.passed:
            failed.append(name)
    if failed:
        print("experiments with failing checks:", ", ".join(failed))
    return 0


if __name__ == "__main__":
    sys.exit(main())
