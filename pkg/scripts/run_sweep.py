"""Inefficiency 1-F of optimized pulses over a (T*gamma, T*Omega_max) grid.

    python scripts/run_sweep.py --out results/sweep [--seed 0] [--grid 5:7.4,5:100]

Defaults to the full 4 x 8 grid. Set QCTRL_WORKERS to spread grid points
over processes.
"""
import argparse

from qctrl.harness import ExperimentConfig, run_sweep


def parse_grid(text):
    return [[float(x) for x in item.split(":")] for item in text.split(",") if item]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid", type=parse_grid)
    ap.add_argument("--segments", type=int, default=30)
    ap.add_argument("--restarts", type=int, default=4)
    ap.add_argument("--method", default="lbfgsb")
    args = ap.parse_args()

    extra = {"grid": args.grid} if args.grid else {}
    config = ExperimentConfig(mode="sweep", seed=args.seed, segments=args.segments,
                              restarts=args.restarts, method=args.method, **extra)
    for rec in run_sweep(config, args.out):
        status = "" if rec.ok else f"  [{rec.error}]"
        print(f"T*gamma={rec.t_gamma:5.1f}  T*Omega_max={rec.t_omega_max:6.1f}  "
              f"1-F={rec.inefficiency:.4e}{status}")


if __name__ == "__main__":
    main()
