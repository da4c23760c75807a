"""Grid over the second-step and late-phase learning rates for one experiment.

Prints the network's best test accuracy (and the Two Step linear baseline)
for each ``(eta2, eta_late)`` pair on a single seed.  This is the sweep used
to pick the default schedule constants.

    python scripts/sweep_schedule.py parity --eta2 1 25 100 --eta-late 0.1 1
"""
import argparse
import sys

from featlearn.harness import ExperimentConfig, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("name", choices=["parity", "interval"])
    ap.add_argument("--eta2", type=float, nargs="+", default=[1.0, 25.0, 100.0])
    ap.add_argument("--eta-late", type=float, nargs="+", default=[0.1, 1.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args(argv)
    base = ExperimentConfig.defaults(args.name)
    print(f"{'eta2':>8} {'eta_late':>9} {'network':>8} {'two_step':>9}")
    for eta2 in args.eta2:
        for eta_late in args.eta_late:
            cfg = base.with_overrides(
                eta2=eta2, eta_late=eta_late, seeds=(args.seed,),
                methods=("Network", "Two Step"),
                out_dir=f"{args.out}/eta2_{eta2:g}_late_{eta_late:g}",
            )
            try:
                rep = run_experiment(cfg)
                net, two = rep.row("Network").test, rep.row("Two Step").test
                print(f"{eta2:8g} {eta_late:9g} {net:8.4f} {two:9.4f}", flush=True)
            except FloatingPointError:
                print(f"{eta2:8g} {eta_late:9g} {'diverged':>8}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
