"""Check F(T, gamma, Omega) = F(aT, gamma/a, Omega/a) on STIRAP and optimized pulses.

    python scripts/check_scaling.py [--t-gamma 5] [--t-omega-max 100]
"""
import argparse

from qctrl.dynamics import SystemParams
from qctrl.harness import verify_scaling
from qctrl.oct import multistart
from qctrl.stirap import StirapShape, gaussian_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-gamma", type=float, default=5.0)
    ap.add_argument("--t-omega-max", type=float, default=100.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = SystemParams.dimensionless(args.t_gamma, args.t_omega_max)
    schedules = {
        "gaussian": gaussian_schedule(StirapShape.default(params), params, 100),
        "optimized": multistart(params, seed=args.seed).schedule(params),
    }
    for name, sched in schedules.items():
        for a in (0.5, 2.0, 10.0):
            f0, f1 = verify_scaling(params, sched, a)
            print(f"{name:9s} a={a:4.1f}  F={f0:.12f}  F_scaled={f1:.12f}  diff={abs(f0 - f1):.1e}")


if __name__ == "__main__":
    main()
