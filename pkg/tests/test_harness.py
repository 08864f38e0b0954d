import csv
import json

import numpy as np
import pytest

from qctrl.dynamics import PulseSchedule, SystemParams, evolve, fidelity, projector
from qctrl.errors import ConfigError
from qctrl.harness import (
    DEFAULT_GRID, SWEEP_HEADER, ExperimentConfig, build_config, dumps, load_config,
    load_schedule, read_json, run_oct, run_simulate, run_stirap, run_sweep,
    sweep_grid, verify_scaling, write_json,
)
from qctrl.oct import OptimizationResult, multistart
from qctrl.stirap import StirapShape, gaussian_schedule


def write_toml(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


class TestConfig:
    def test_load(self, tmp_path):
        path = write_toml(tmp_path, 'mode = "sweep"\nseed = 3\ngrid = [[5, 7.4], [0, 100]]\n')
        config = load_config(path)
        assert config.seed == 3 and config.grid == [[5, 7.4], [0, 100]]
        assert config.n_segments == 30

    def test_overrides_win(self, tmp_path):
        path = write_toml(tmp_path, 'mode = "oct"\nseed = 3\nrestarts = 2\n')
        assert load_config(path, restarts=5, method=None).restarts == 5

    def test_missing_seed(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_toml(tmp_path, 'mode = "oct"\n'))
        assert err.value.field == "seed"

    def test_negative_t_gamma_points_at_line(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_toml(tmp_path, 'mode = "oct"\nseed = 1\n\nt_gamma = -5\n'))
        assert err.value.field == "t_gamma" and err.value.line == 4

    def test_negative_grid_entry(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_toml(tmp_path, 'mode = "sweep"\nseed = 1\ngrid = [[-1, 5]]\n'))
        assert err.value.line == 3

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_toml(tmp_path, 'mode = "oct"\nseed = 1\nlearning_rat = 2\n'))
        assert err.value.field == "learning_rat" and err.value.line == 3
        data = err.value.to_dict()
        assert data["error"] == "config" and json.dumps(data)

    def test_tables_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_toml(tmp_path, 'seed = 1\n[oct]\nrestarts = 2\n'))

    def test_syntax_error_has_line(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_toml(tmp_path, 'mode = "oct"\nseed = = 1\n'))
        assert err.value.line == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")

    @pytest.mark.parametrize("key, value", [
        ("seed", -1), ("seed", 1.5), ("seed", True), ("t_omega_max", 0.0), ("segments", 0),
        ("method", "bfgs"), ("restarts", 0), ("preset", "ppo"), ("episodes", -3),
        ("tau", 0.0), ("width", -1.0), ("mode", "plot"), ("t_gamma", float("nan")),
    ])
    def test_invalid_values(self, key, value):
        values = {"mode": "oct", "seed": 0, key: value}
        with pytest.raises(ConfigError) as err:
            build_config(values)
        assert err.value.field == key

    def test_default_grid(self):
        config = ExperimentConfig(mode="sweep", seed=0)
        assert len(config.grid) == 32 == len(DEFAULT_GRID)
        assert sorted({p[1] for p in config.grid}) == [5, 7.4, 10, 13.8, 20, 40, 70, 100]
        assert sorted({p[0] for p in config.grid}) == [0, 1, 5, 10]


class TestSerialization:
    def test_optimization_result_byte_identical(self, tmp_path):
        res = multistart(SystemParams.dimensionless(5, 10), n_restarts=1, seed=0,
                         n_segments=4, budget=20, workers=1)
        first = dumps(res.to_dict())
        path = write_json(tmp_path / "r.json", res.to_dict())
        again = dumps(OptimizationResult.from_dict(read_json(path)).to_dict())
        assert again == first == path.read_text()

    def test_schedule_round_trip(self, tmp_path):
        params = SystemParams.dimensionless(0, 30)
        sched = gaussian_schedule(StirapShape.default(params), params, 17)
        write_json(tmp_path / "s.json", {"schedule": sched.to_dict()})
        assert load_schedule(tmp_path / "s.json") == sched

    def test_bad_schedule_file(self, tmp_path):
        write_json(tmp_path / "s.json", {"kind": "piecewise-constant"})
        with pytest.raises(ConfigError):
            load_schedule(tmp_path / "s.json")


@pytest.fixture(scope="module")
def case():
    params = SystemParams.dimensionless(5, 100)
    return params, gaussian_schedule(StirapShape.default(params), params, 60)


class TestScaling:
    def test_identity(self, case):
        f0, f1 = verify_scaling(*case, 1.0)
        assert f0 == f1

    @pytest.mark.parametrize("alpha", [0.5, 2.0, 10.0])
    def test_invariance(self, case, alpha):
        f0, f1 = verify_scaling(*case, alpha)
        assert abs(f0 - f1) < 1e-8

    def test_analytic_schedule(self):
        params = SystemParams.dimensionless(5, 40)
        from qctrl.stirap import gaussian_envelopes
        f0, f1 = verify_scaling(params, gaussian_envelopes(StirapShape.default(params), params, 40), 2.0)
        assert abs(f0 - f1) < 1e-8

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_rejects(self, case, alpha):
        with pytest.raises(ValueError):
            verify_scaling(*case, alpha)


class TestSweep:
    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            sweep_grid([])

    def test_reference_points_added(self):
        points = sweep_grid([(5, 20), (5, 20), (0, 10)])
        assert points == [(5.0, 20.0), (0.0, 10.0), (5.0, 7.4), (5.0, 13.8), (5.0, 100.0)]
        assert sweep_grid([(1, 20)]) == [(1.0, 20.0)]

    def test_rows_and_reproducible_fidelities(self, tmp_path):
        config = ExperimentConfig(mode="sweep", seed=2, grid=[[1, 10], [0, 6]],
                                  segments=6, restarts=2, budget=60)
        records = run_sweep(config, tmp_path, workers=1)
        with open(tmp_path / "sweep.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == SWEEP_HEADER
        assert len(rows) == 3
        for rec, row in zip(records, rows[1:]):
            assert rec.ok and row[-1] == "ok"
            assert rec.inefficiency == pytest.approx(1 - rec.fidelity, abs=1e-12)
            assert float(row[2]) == rec.inefficiency
            params = SystemParams.dimensionless(rec.t_gamma, rec.t_omega_max)
            alpha = np.array(rec.best_alpha)
            sched = PulseSchedule.constant(alpha[:6], alpha[6:], 1.0)
            replay = fidelity(evolve(projector("g"), sched, params)[-1])
            assert replay == pytest.approx(rec.fidelity, abs=1e-9)
        assert "wall_time" not in (tmp_path / "sweep.json").read_text()

    def test_failure_flagged_and_sweep_continues(self, tmp_path, monkeypatch):
        import qctrl.harness as harness
        real = harness.multistart

        def flaky(params, *args, **kwargs):
            if params.t_omega_max == 6:
                raise FloatingPointError("boom")
            return real(params, *args, **kwargs)

        monkeypatch.setattr(harness, "multistart", flaky)
        config = ExperimentConfig(mode="sweep", seed=0, grid=[[1, 6], [1, 8]],
                                  segments=4, restarts=1, budget=20)
        bad, good = run_sweep(config, tmp_path, workers=1)
        assert not bad.ok and "boom" in bad.error and np.isnan(bad.fidelity)
        assert good.ok
        text = (tmp_path / "sweep.csv").read_text().splitlines()
        assert text[1].endswith("error: FloatingPointError: boom")


class TestRunners:
    def test_simulate_default(self):
        out = run_simulate(ExperimentConfig(mode="simulate", seed=0, t_gamma=0, t_omega_max=100))
        assert out["fidelity"] >= 0.99
        assert len(out["trajectory"]) == 101
        assert np.asarray(out["trajectory"]).shape == (101, 4, 4, 2)

    def test_stirap_diagnostics(self):
        out = run_stirap(ExperimentConfig(mode="stirap", seed=0, t_gamma=5, t_omega_max=100))
        d = out["diagnostics"]
        assert d["global_product"] == pytest.approx(10.0)
        assert d["theta_initial"] < 0.01 and d["theta_final"] > np.pi / 2 - 0.01
        assert d["min_margin"] > 1 and d["fidelity"] >= 0.9

    def test_oct_output_consistent(self):
        out = run_oct(ExperimentConfig(mode="oct", seed=0, t_gamma=5, t_omega_max=10,
                                       segments=5, restarts=1, budget=40), workers=1)
        assert out["fidelity"] == pytest.approx(out["result"]["fidelity"], abs=1e-9)
        assert len(out["populations"]) == 6
        assert out["populations"][-1][2] == pytest.approx(out["fidelity"], abs=1e-12)
