import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from rcbo import logio, tasks
from rcbo.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SPACE = {
    "alpha": {"low": 0.1, "high": 1.5},
    "beta": {"low": 1e-10, "high": 1, "scale": "log10"},
    "gamma": {"low": 1e-10, "high": 1, "scale": "log10"},
    "rho": {"low": 1e-10, "high": 1, "scale": "log10"},
}
GRID = {"alpha": [0.6, 0.8, 1.0], "beta": [0.01, 0.1], "gamma": [0.001, 0.01, 0.1],
        "rho": [0.001, 0.01, 0.1]}
TINY_TASK = {"kind": "synthetic", "n_features": 4, "n_classes": 3, "sequences_per_class": 6,
             "min_length": 5, "max_length": 9, "seed": 1}


def write_cfg(path, **over):
    cfg = {"seed": 0, "task": {"kind": "toy", "surface": "pit_2d"},
           "space": {**SPACE, "fixed": {"gamma": 0.01, "rho": 0.01}},
           "method": {"kind": "bayes", "budget": 10, "init_count": 5}}
    cfg.update(over)
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def run_ok(*argv):
    assert main(list(argv)) == 0


class TestOptimize:
    def test_bayes_writes_log(self, tmp_path):
        out = tmp_path / "run"
        run_ok("optimize", "--config", write_cfg(tmp_path / "c.yaml"), "--out", str(out))
        clog = logio.read_log(out)
        assert len(clog) == 10
        for name in (logio.SUMMARY, logio.TRACE, logio.SURROGATE, "config.yaml"):
            assert (out / name).is_file()

    def test_budget_twenty_with_eight_initial(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", space=SPACE, task={"kind": "toy",
                        "surface": "sensitive_2of4_4d"},
                        method={"kind": "bayes", "budget": 20, "init_count": 8})
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "r"))
        clog = logio.read_log(tmp_path / "r")
        assert [o.method for o in clog.observations].count("initial") == 8
        assert len(clog) == 20

    def test_grid_writes_54_lines(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", space=SPACE,
                        task={"kind": "toy", "surface": "sensitive_2of4_4d"},
                        method={"kind": "grid", "values": GRID})
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "g"))
        lines = (tmp_path / "g" / logio.OBSERVATIONS).read_text().splitlines()
        assert len(lines) == 1 + 54

    def test_seed_override(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml")
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "9")
        assert logio.read_log(tmp_path / "a").seed == 9

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RCBO_OUTPUT_DIR", str(tmp_path / "env"))
        run_ok("optimize", "--config", write_cfg(tmp_path / "c.yaml", output="nowhere"))
        assert (tmp_path / "env" / logio.OBSERVATIONS).is_file()
        assert not (tmp_path / "nowhere").exists()

    def test_synthetic_with_tuned_lambda(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", task=TINY_TASK, reservoir={"n_nodes": 12},
                        method={"kind": "bayes", "budget": 4, "init_count": 3})
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "s"), "--tune-lambda",
               "--workers", "2")
        clog = logio.read_log(tmp_path / "s")
        assert all(0.0 <= o.objective <= 1.0 for o in clog.observations)
        copy = yaml.safe_load((tmp_path / "s" / "config.yaml").read_text())
        assert copy["training"]["tune_lambda"] is True and copy["workers"] == 2


class TestConfigErrors:
    @pytest.mark.parametrize("mutate", [
        lambda c: c["space"].pop("beta"),
        lambda c: c["space"]["alpha"].update(low=2.0),
        lambda c: c["method"].update(budget=3),
        lambda c: c["method"].update(init_count=1),
        lambda c: c.update(colour="blue"),
        lambda c: c["task"].update(surface="banana"),
        lambda c: c["method"].update(kind="annealing"),
        lambda c: c["space"]["beta"].update(scale="log10", low=0),
    ])
    def test_exit_two_and_no_files(self, tmp_path, mutate):
        cfg = {"seed": 0, "task": {"kind": "toy", "surface": "pit_2d"},
               "space": {k: dict(v) for k, v in SPACE.items()},
               "method": {"kind": "bayes", "budget": 10, "init_count": 5}}
        cfg["space"]["fixed"] = {"gamma": 0.01, "rho": 0.01}
        mutate(cfg)
        (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
        out = tmp_path / "out"
        assert main(["optimize", "--config", str(tmp_path / "c.yaml"), "--out", str(out)]) == 2
        assert not out.exists()

    def test_missing_config_file(self, tmp_path):
        assert main(["optimize", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_missing_feature_dir(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", task={"kind": "features", "path": "absent"})
        assert main(["optimize", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_usage_error(self):
        assert main(["optimize"]) == 2


class TestRuntimeFailure:
    class Broken:
        direction = "max"

        def __call__(self, p):
            raise RuntimeError("evaluator down")

    def test_all_failed_exits_one(self, tmp_path, monkeypatch):
        from rcbo import config
        monkeypatch.setattr(config, "build_objective", lambda cfg: (self.Broken(), None))
        out = tmp_path / "o"
        assert main(["optimize", "--config", write_cfg(tmp_path / "c.yaml"), "--out",
                     str(out)]) == 1
        clog = logio.read_log(out)
        assert len(clog) == 10 and all(o.failed for o in clog.observations)
        assert main(["report", str(out)]) == 0

    def test_crash_keeps_partial_log(self, tmp_path, monkeypatch):
        from rcbo import campaign, config
        calls = []

        def objective(p):
            calls.append(p)
            if len(calls) > 6:
                raise KeyboardInterrupt  # escapes the per-evaluation guard
            return 1.0
        objective.direction = "max"
        monkeypatch.setattr(config, "build_objective", lambda cfg: (objective, None))
        monkeypatch.setattr(campaign, "_evaluate", _strict_evaluate)
        out = tmp_path / "o"
        assert main(["optimize", "--config", write_cfg(tmp_path / "c.yaml"), "--out",
                     str(out)]) == 1
        assert len(logio.read_log(out)) == 6
        s = json.loads((out / logio.SUMMARY).read_text())
        assert s["stop_reason"].startswith("error")


def _strict_evaluate(objective, point, iteration, method, seed):
    from rcbo.campaign import Observation
    try:
        return Observation(iteration, method, point, float(objective(point)), 0.0, seed)
    except KeyboardInterrupt:
        raise RuntimeError("simulated crash") from None


class TestReport:
    def test_single_observation(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path / "c.yaml", space=SPACE,
                        task={"kind": "toy", "surface": "sensitive_2of4_4d"},
                        method={"kind": "grid", "values": {"alpha": [1.0], "beta": [0.1],
                                                           "gamma": [0.1], "rho": [0.1]}})
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "o"))
        capsys.readouterr()
        run_ok("report", str(tmp_path / "o"))
        text = capsys.readouterr().out
        assert "insufficient data" in text and "iteration 1" in text

    def test_json(self, tmp_path, capsys):
        run_ok("optimize", "--config", write_cfg(tmp_path / "c.yaml"), "--out",
               str(tmp_path / "o"))
        capsys.readouterr()
        run_ok("report", str(tmp_path / "o"), "--json")
        r = json.loads(capsys.readouterr().out)
        assert r["n_observations"] == 10 and r["best"]["objective"] is not None
        assert [row["slack"] for row in r["iterations_to_within"]] == [0.0, 0.013]

    def test_bad_logs(self, tmp_path):
        assert main(["report", str(tmp_path)]) == 2
        run_ok("optimize", "--config", write_cfg(tmp_path / "c.yaml"), "--out",
               str(tmp_path / "o"))
        p = tmp_path / "o" / logio.OBSERVATIONS
        lines = p.read_text().splitlines()
        head = json.loads(lines[0])
        head["version"] = 7
        p.write_text("\n".join([json.dumps(head)] + lines[1:]) + "\n")
        assert main(["report", str(tmp_path / "o")]) == 2


class TestReplay:
    @pytest.fixture
    def run_dir(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml")
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "o"))
        return tmp_path / "o"

    def test_identical(self, run_dir):
        run_ok("replay", str(run_dir), "--config", str(run_dir / "config.yaml"))

    def test_different_seed_diverges_at_first_iteration(self, run_dir, capsys):
        code = main(["replay", str(run_dir), "--config", str(run_dir / "config.yaml"),
                     "--seed", "1"])
        assert code == 1
        assert "DIVERGED at iteration 1" in capsys.readouterr().err

    def test_tampered_objective(self, run_dir, capsys):
        p = run_dir / logio.OBSERVATIONS
        lines = p.read_text().splitlines()
        rec = json.loads(lines[7])
        rec["objective"] = rec["objective"] + 1e-9
        lines[7] = json.dumps(rec)
        p.write_text("\n".join(lines) + "\n")
        assert main(["replay", str(run_dir), "--config", str(run_dir / "config.yaml")]) == 1
        assert f"DIVERGED at iteration {rec['iteration']}" in capsys.readouterr().err

    def test_truncated_log(self, run_dir, capsys):
        p = run_dir / logio.OBSERVATIONS
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-2]) + "\n")
        assert main(["replay", str(run_dir), "--config", str(run_dir / "config.yaml")]) == 1
        assert "DIVERGED at iteration 9" in capsys.readouterr().err


class TestExport:
    def test_round_trip_through_features_task(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.yaml", task=TINY_TASK, reservoir={"n_nodes": 12},
                        method={"kind": "bayes", "budget": 3, "init_count": 2})
        run_ok("export-dataset", "--config", cfg, "--out", str(tmp_path / "ds"))
        spec = tasks.SyntheticTaskSpec(**{k: v for k, v in TINY_TASK.items() if k != "kind"})
        assert tasks.load_features(tmp_path / "ds").equals(tasks.generate_synthetic(spec))
        # same campaign on the exported files gives the same objectives
        cfg2 = write_cfg(tmp_path / "c2.yaml", task={"kind": "features", "path": "ds"},
                         reservoir={"n_nodes": 12},
                         method={"kind": "bayes", "budget": 3, "init_count": 2})
        run_ok("optimize", "--config", cfg, "--out", str(tmp_path / "a"))
        run_ok("optimize", "--config", cfg2, "--out", str(tmp_path / "b"))
        va = [o.objective for o in logio.read_log(tmp_path / "a").observations]
        vb = [o.objective for o in logio.read_log(tmp_path / "b").observations]
        assert va == vb

    def test_toy_task_rejected(self, tmp_path):
        assert main(["export-dataset", "--config", write_cfg(tmp_path / "c.yaml"),
                     "--out", str(tmp_path / "x")]) == 2


def test_shipped_configs_parse():
    from rcbo import config
    for f in sorted(CONFIGS.glob("*.yaml")):
        config.load(f)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "rcbo", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.startswith("rcbo ")
