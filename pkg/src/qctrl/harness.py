"""Experiment configuration, sweeps and result persistence.

Everything is dimensionless: T = 1 internally and a system point is fixed by
(T*gamma, T*Omega_max).
"""
from __future__ import annotations

import csv
import io
import json
import re
import sys
import time
from dataclasses import dataclass, field, fields
from functools import partial
from pathlib import Path

import numpy as np

from .dynamics import (
    PulseSchedule, SystemParams, evolve, fidelity, projector, trajectory_to_json,
)
from .errors import ConfigError
from .oct import METHODS, cost, multistart, schedule_to_alpha
from .parallel import ordered_map
from .rl import PRESETS, preset, train
from .stirap import (
    StirapShape, gaussian_envelopes, gaussian_schedule, global_adiabaticity_product,
    is_counterintuitive, min_margin, theta_profile,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("simulate", "stirap", "oct", "rl", "sweep")
DEFAULT_GRID = tuple(
    (t_gamma, t_omega)
    for t_gamma in (0.0, 1.0, 5.0, 10.0)
    for t_omega in (5.0, 7.4, 10.0, 13.8, 20.0, 40.0, 70.0, 100.0)
)
REFERENCE_T_GAMMA = 5.0
REFERENCE_T_OMEGA = (7.4, 13.8, 100.0)
SWEEP_HEADER = ("t_gamma", "t_omega_max", "inefficiency", "fidelity", "seed", "status")
DEFAULT_SEGMENTS = {"simulate": 100, "stirap": 100, "oct": 30, "sweep": 30, "rl": 30}


@dataclass
class ExperimentConfig:
    """Validated settings for one CLI run.

    ``t_gamma``/``t_omega_max`` describe the single system point used by
    every mode except ``sweep``, which walks ``grid`` instead. ``segments``
    of ``None`` means the per-mode default. For ``rl`` the episode length
    is ``steps``.
    """

    mode: str
    seed: int
    out: str | None = None
    t_gamma: float = 5.0
    t_omega_max: float = 100.0
    grid: list = field(default_factory=lambda: [list(p) for p in DEFAULT_GRID])
    segments: int | None = None
    substeps: int = 10
    method: str = "lbfgsb"
    restarts: int = 4
    budget: int | None = None
    tau: float = 0.1
    width: float = 1 / 6
    preset: str = "reinforce-sgd"
    episodes: int = 2000
    steps: int = 30
    schedule: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def params(self):
        return SystemParams.dimensionless(self.t_gamma, self.t_omega_max)

    @property
    def n_segments(self):
        return DEFAULT_SEGMENTS[self.mode] if self.segments is None else self.segments

    def validate(self):
        _check_choice("mode", self.mode, MODES)
        if self.seed is None:
            raise ConfigError("seed is required (no unseeded runs)", field="seed")
        _check_int("seed", self.seed, 0)
        _check_number("t_gamma", self.t_gamma, 0.0, strict=False)
        _check_number("t_omega_max", self.t_omega_max, 0.0, strict=True)
        if not isinstance(self.grid, (list, tuple)):
            raise ConfigError("grid must be a list of [t_gamma, t_omega_max] pairs", field="grid")
        for i, point in enumerate(self.grid):
            if not isinstance(point, (list, tuple)) or len(point) != 2:
                raise ConfigError(f"grid[{i}] must be a [t_gamma, t_omega_max] pair", field="grid")
            _check_number(f"grid[{i}].t_gamma", point[0], 0.0, strict=False)
            _check_number(f"grid[{i}].t_omega_max", point[1], 0.0, strict=True)
        if self.segments is not None:
            _check_int("segments", self.segments, 2 if self.mode == "stirap" else 1)
        _check_int("substeps", self.substeps, 1)
        _check_choice("method", self.method, METHODS)
        _check_int("restarts", self.restarts, 1)
        if self.budget is not None:
            _check_int("budget", self.budget, 1)
        _check_number("tau", self.tau, 0.0, strict=True)
        _check_number("width", self.width, 0.0, strict=True)
        _check_choice("preset", self.preset, tuple(PRESETS))
        _check_int("episodes", self.episodes, 0)
        _check_int("steps", self.steps, 1)

    def to_dict(self):
        """Settings that determine the results (the output location is left out)."""
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "out"}


def _check_choice(name, value, choices):
    if value not in choices:
        raise ConfigError(f"{name} must be one of {list(choices)}, got {value!r}", field=name)


def _check_int(name, value, low):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}", field=name)
    if value < low:
        raise ConfigError(f"{name} must be >= {low}, got {value}", field=name)


def _check_number(name, value, low, strict):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    if not np.isfinite(value) or value < low or (strict and value == low):
        op = ">" if strict else ">="
        raise ConfigError(f"{name} must be {op} {low}, got {value}", field=name)


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def _key_lines(text):
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_-]*)\s*=", line)
        if m:
            lines.setdefault(m.group(1), number)
    return lines


def read_config(path):
    """Raw key/value mapping of a TOML config file plus the line of each key.

    Unknown keys and syntax errors raise ``ConfigError`` with the offending
    field and line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"{path}: {exc}", line=int(m.group(1)) if m else None) from None
    lines = _key_lines(text)
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"tables are not supported ([{key}])", field=key, line=lines.get(key))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", field=key, line=lines.get(key))
    return data, lines


def build_config(values, lines=None):
    """``ExperimentConfig`` from a mapping; errors point at the file line when known."""
    lines = lines or {}
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", field=unknown[0], line=lines.get(unknown[0]))
    if values.get("seed") is None:
        raise ConfigError("seed is required (no unseeded runs)", field="seed")
    if "mode" not in values:
        raise ConfigError("mode is required", field="mode")
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            exc.line = lines.get(exc.field.split("[")[0])
        raise


def load_config(path, **overrides):
    """Read, merge ``overrides`` (ignoring ``None``) and validate a config file."""
    data, lines = read_config(path)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
            lines.pop(key, None)
    return build_config(data, lines)


# -- serialization ---------------------------------------------------------------

def dumps(obj):
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


# -- scaling -------------------------------------------------------------------

def verify_scaling(params, schedule, alpha_scale, substeps=10):
    """Fidelities of the original and the time-stretched, amplitude-shrunk system."""
    if not alpha_scale > 0:
        raise ValueError(f"alpha_scale must be > 0, got {alpha_scale}")
    start = projector("g")
    f_original = fidelity(evolve(start, schedule, params, substeps)[-1])
    f_scaled = fidelity(evolve(
        start, schedule.rescaled(alpha_scale), params.rescaled(alpha_scale), substeps)[-1])
    return f_original, f_scaled


# -- sweeps --------------------------------------------------------------------

@dataclass
class SweepRecord:
    t_gamma: float
    t_omega_max: float
    method: str
    inefficiency: float
    fidelity: float
    restart: int | None
    seed: int
    ok: bool = True
    error: str = ""
    best_alpha: list | None = None
    wall_time: float = 0.0

    def csv_row(self):
        status = "ok" if self.ok else f"error: {self.error}"
        return [repr(float(self.t_gamma)), repr(float(self.t_omega_max)),
                repr(float(self.inefficiency)), repr(float(self.fidelity)), self.seed, status]

    def to_dict(self):
        """JSON form; wall_time is left out so outputs stay reproducible."""
        return {
            "t_gamma": self.t_gamma, "t_omega_max": self.t_omega_max, "method": self.method,
            "inefficiency": self.inefficiency, "fidelity": self.fidelity,
            "restart": self.restart, "seed": self.seed, "ok": self.ok, "error": self.error,
            "best_alpha": self.best_alpha,
        }


def sweep_grid(grid):
    """Deduplicated grid points in order, plus the reference points when T*gamma = 5 is present."""
    points = []
    for t_gamma, t_omega in grid:
        p = (float(t_gamma), float(t_omega))
        if p not in points:
            points.append(p)
    if not points:
        raise ConfigError("sweep grid is empty", field="grid")
    if any(p[0] == REFERENCE_T_GAMMA for p in points):
        for t_omega in REFERENCE_T_OMEGA:
            p = (REFERENCE_T_GAMMA, t_omega)
            if p not in points:
                points.append(p)
    return points


def _sweep_point(point, config):
    t_gamma, t_omega = point
    start = time.perf_counter()
    try:
        params = SystemParams.dimensionless(t_gamma, t_omega)
        res = multistart(params, config.method, config.restarts, config.seed,
                         config.n_segments, config.budget, workers=1)
        return SweepRecord(t_gamma, t_omega, config.method, res.best_cost, res.fidelity,
                           res.restart_index, config.seed,
                           best_alpha=[float(x) for x in res.best_alpha],
                           wall_time=time.perf_counter() - start)
    except Exception as exc:  # flagged in the table; the sweep goes on
        return SweepRecord(t_gamma, t_omega, config.method, float("nan"), float("nan"), None,
                           config.seed, ok=False, error=f"{type(exc).__name__}: {exc}",
                           wall_time=time.perf_counter() - start)


def run_sweep(config, out_dir=None, workers=None):
    """One multistart per grid point, written as ``sweep.csv`` and ``sweep.json``."""
    points = sweep_grid(config.grid)
    records = ordered_map(partial(_sweep_point, config=config), points, workers)
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "sweep.csv", SWEEP_HEADER, [r.csv_row() for r in records])
        write_json(out_dir / "sweep.json", {
            "config": config.to_dict(),
            "n_segments": config.n_segments,
            "records": [r.to_dict() for r in records],
        })
    return records


# -- single-point experiments -----------------------------------------------------

def params_to_dict(params):
    return {"delta_p": params.delta_p, "delta_3": params.delta_3, "gamma": params.gamma,
            "t_final": params.t_final, "omega_max": params.omega_max}


def populations(trajectory):
    """Diagonal of each density matrix, rows ordered (g, e, r, s)."""
    return [[float(x) for x in np.real(np.diagonal(rho))] for rho in trajectory]


def stirap_shape(config):
    return StirapShape(config.t_omega_max, config.tau, config.width)


def load_schedule(path):
    """Schedule JSON, or any result JSON carrying a ``schedule`` entry."""
    data = read_json(path)
    if "schedule" in data and isinstance(data["schedule"], dict):
        data = data["schedule"]
    try:
        return PulseSchedule.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path} is not a schedule JSON: {exc}", field="schedule") from None


def run_simulate(config):
    params = config.params
    if config.schedule is not None:
        schedule = load_schedule(config.schedule)
    else:
        schedule = gaussian_schedule(stirap_shape(config), params, config.n_segments)
    traj = evolve(projector("g"), schedule, params, config.substeps)
    return {
        "mode": "simulate",
        "params": params_to_dict(params),
        "schedule": schedule.to_dict(),
        "fidelity": fidelity(traj[-1]),
        "times": [float(t) for t in schedule.times],
        "populations": populations(traj),
        "trajectory": trajectory_to_json(traj),
    }


def run_stirap(config):
    params = config.params
    shape = stirap_shape(config)
    smooth = gaussian_envelopes(shape, params)
    schedule = gaussian_schedule(shape, params, config.n_segments)
    traj = evolve(projector("g"), schedule, params, config.substeps)
    return {
        "mode": "stirap",
        "params": params_to_dict(params),
        "shape": {"omega_peak": shape.omega_peak, "tau": shape.tau, "width": shape.width},
        "schedule": schedule.to_dict(),
        "diagnostics": {
            "theta_initial": float(theta_profile(smooth, 0.0)),
            "theta_final": float(theta_profile(smooth, params.t_final)),
            "global_product": float(global_adiabaticity_product(shape)),
            "min_margin": float(min_margin(smooth, params)),
            "fidelity": fidelity(traj[-1]),
        },
        "populations": populations(traj),
    }


def run_oct(config, workers=None):
    params = config.params
    result = multistart(params, config.method, config.restarts, config.seed,
                        config.n_segments, config.budget, workers)
    schedule = result.schedule(params)
    traj = evolve(projector("g"), schedule, params)
    baseline = gaussian_schedule(StirapShape.default(params), params, config.n_segments)
    return {
        "mode": "oct",
        "params": params_to_dict(params),
        "result": result.to_dict(),
        "schedule": schedule.to_dict(),
        "fidelity": fidelity(traj[-1]),
        "counterintuitive": is_counterintuitive(schedule) if result.best_alpha.any() else False,
        "gaussian_baseline_cost": cost(schedule_to_alpha(baseline), params),
        "populations": populations(traj),
    }


def rl_config(config):
    return preset(config.preset, n_steps=config.steps, max_episodes=config.episodes,
                  seed=config.seed)


def run_rl(config, out_dir=None, callback=None):
    """Train, replay the best pulses with and without decay, and write the outputs."""
    params = config.params
    trainer = rl_config(config)
    result = train(trainer, params, callback)
    evaluation = {
        "mode": "rl",
        "params": params_to_dict(params),
        "trainer": trainer.to_dict(),
        "n_params": result.net.n_params,
        "episodes_run": len(result.curve),
        "best_reward": None,
        "replay_fidelity": None,
        "replay_fidelity_gamma0": None,
        "counterintuitive": None,
    }
    best_json = None
    if result.best is not None:
        schedule = result.best.schedule(params)
        closed = SystemParams.dimensionless(0.0, config.t_omega_max)
        evaluation.update(
            best_reward=result.best.reward,
            best_episode=result.best.episode,
            replay_fidelity=fidelity(evolve(projector("g"), schedule, params)[-1]),
            replay_fidelity_gamma0=fidelity(evolve(projector("g"), schedule, closed)[-1]),
            counterintuitive=is_counterintuitive(schedule),
        )
        best_json = result.best.to_dict(params)
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "learning_curve.csv", ("episode", "mean_reward", "best_reward"),
                  [(e, repr(m), repr(b)) for e, m, b in result.curve])
        write_json(out_dir / "evaluation.json", evaluation)
        write_json(out_dir / "policy.json", result.net.to_dict())
        if best_json is not None:
            write_json(out_dir / "best_pulses.json", best_json)
    return result, evaluation
