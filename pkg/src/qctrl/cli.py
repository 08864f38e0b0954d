"""``qctrl`` command line entry point.

Every subcommand accepts ``--config <file.toml>``; explicit flags override
file values. Failures print one JSON object to stderr and exit nonzero
(2 for usage/config problems, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, QctrlError
from .parallel import WORKERS_ENV


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _grid(text):
    try:
        return [[float(x) for x in item.split(":")] for item in text.split(",") if item]
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like 5:7.4,5:13.8") from None


def _common(p):
    p.add_argument("--config", help="TOML file with experiment settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file (.json) or directory")
    p.add_argument("--t-gamma", dest="t_gamma", type=float)
    p.add_argument("--t-omega-max", dest="t_omega_max", type=float)


def build_parser():
    parser = _Parser(
        prog="qctrl",
        description=f"Three-level transfer experiments. Worker processes: ${WORKERS_ENV}.",
    )
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="evolve |g><g| under a schedule")
    _common(p)
    p.add_argument("--schedule", help="schedule JSON (defaults to the Gaussian pair)")
    p.add_argument("--segments", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--width", type=float)

    p = sub.add_parser("stirap", help="Gaussian reference pulses and diagnostics")
    _common(p)
    p.add_argument("--tau", type=float, help="pulse separation in units of T")
    p.add_argument("--width", type=float, help="1/e half-width in units of T")
    p.add_argument("--segments", type=int)
    p.add_argument("--substeps", type=int)

    p = sub.add_parser("oct", help="multistart pulse optimization")
    _common(p)
    p.add_argument("--segments", type=int)
    p.add_argument("--method", choices=("nelder-mead", "powell", "lbfgsb"))
    p.add_argument("--restarts", type=int)
    p.add_argument("--budget", type=int)

    p = sub.add_parser("rl", help="train a REINFORCE agent")
    _common(p)
    p.add_argument("--preset", choices=("reinforce-sgd", "reinforce-adam"))
    p.add_argument("--steps", type=int)
    p.add_argument("--episodes", type=int)

    p = sub.add_parser("sweep", help="optimize over a (t_gamma, t_omega_max) grid")
    _common(p)
    p.add_argument("--grid", type=_grid, help="t_gamma:t_omega_max pairs, comma separated")
    p.add_argument("--segments", type=int)
    p.add_argument("--method", choices=("nelder-mead", "powell", "lbfgsb"))
    p.add_argument("--restarts", type=int)
    p.add_argument("--budget", type=int)
    return parser


def config_from_args(args):
    values = {k: v for k, v in vars(args).items() if k not in ("config", "mode") and v is not None}
    if args.config is None:
        return harness.build_config({"mode": args.mode, **values})
    data, _ = harness.read_config(args.config)
    if "mode" in data and data["mode"] != args.mode:
        raise ConfigError(f"config mode {data['mode']!r} does not match subcommand {args.mode!r}",
                          field="mode")
    return harness.load_config(args.config, mode=args.mode, **values)


def _write_single(config, payload):
    if config.out is None:
        sys.stdout.write(harness.dumps(payload))
        return []
    out = Path(config.out)
    path = out if out.suffix == ".json" else out / f"{config.mode}.json"
    return [str(harness.write_json(path, payload))]


def run(config):
    """Execute ``config`` and return the list of files written."""
    if config.mode == "simulate":
        return _write_single(config, harness.run_simulate(config))
    if config.mode == "stirap":
        return _write_single(config, harness.run_stirap(config))
    if config.mode == "oct":
        return _write_single(config, harness.run_oct(config))
    out = Path(config.out or f"{config.mode}-out")
    if config.mode == "rl":
        harness.run_rl(config, out)
        names = ["learning_curve.csv", "evaluation.json", "policy.json", "best_pulses.json"]
    else:
        harness.run_sweep(config, out)
        names = ["sweep.csv", "sweep.json"]
    return [str(out / n) for n in names if (out / n).exists()]


def _fail(kind, message, code, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        config = config_from_args(args)
        written = run(config)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except ConfigError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except (QctrlError, ValueError, ArithmeticError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    if written:
        sys.stdout.write(json.dumps({"status": "ok", "outputs": written}) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
