"""Command line interface: subcommands, overrides and exit codes."""

import json

import numpy as np
import pytest

from beliefgraph import io
from beliefgraph.cli import main

BASE = [
    "--agents", "6", "--states", "3", "--signals", "3", "--edge-prob", "0.5",
    "--delta", "0.3", "--mu", "0.05", "--iters", "200", "--true-state", "1",
]


def run_cli(*args):
    return main([str(a) for a in args])


class TestExperimentCommand:
    def test_writes_bundle_and_exits_zero(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli("experiment", *BASE, "--out", out) == 0
        assert (out / "manifest.json").exists()
        assert "steady-state msd" in capsys.readouterr().out

    def test_invalid_config_exits_one(self, tmp_path, capsys):
        code = run_cli("experiment", *BASE, "--delta", "1.5", "--out", tmp_path / "x")
        assert code == 1
        assert "configuration error" in capsys.readouterr().err

    def test_missing_out_exits_one(self):
        assert run_cli("experiment", *BASE) == 1

    def test_runtime_failure_exits_two(self, tmp_path, capsys):
        code = run_cli("experiment", "--config", tmp_path / "missing.json",
                       "--out", tmp_path / "y")
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_divergent_run_exits_three(self, tmp_path):
        code = run_cli("experiment", *BASE, "--mu", "50.0", "--mode", "known",
                       "--out", tmp_path / "div")
        assert code == 3

    def test_flags_override_config_file(self, tmp_path):
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({
            "agents": 6, "states": 3, "signals": 3, "edge_prob": 0.5,
            "delta": 0.3, "mu": 0.05, "iterations": 200, "true_state": 1,
            "mode": "known",
        }))
        out = tmp_path / "override"
        assert run_cli("experiment", "--config", config_file, "--iters", "150",
                       "--out", out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["iterations"] == 150
        assert manifest["config"]["mode"] == "known"

    def test_schedule_flags(self, tmp_path):
        out = tmp_path / "sched"
        assert run_cli(
            "experiment", *BASE, "--iters", "120",
            "--set-state-at", "30:2", "--regen-graph-at", "60:9",
            "--out", out,
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["schedule"] == [
            {"iteration": 30, "action": "set_true_state", "value": 2},
            {"iteration": 60, "action": "regenerate_graph", "value": 9},
        ]
        trace = io.read_trace(out / "trace.csv")
        assert trace["events"] == {30: "set_true_state", 60: "regenerate_graph"}

    def test_bad_schedule_flag_exits_one(self, tmp_path):
        assert run_cli("experiment", *BASE, "--set-state-at", "30",
                       "--out", tmp_path / "bad") == 1


class TestSimulateAndLearn:
    @pytest.fixture
    def forward_run(self, tmp_path):
        out = tmp_path / "fwd"
        assert run_cli("simulate", *BASE, "--out", out) == 0
        return out

    def test_simulate_writes_forward_bundle(self, forward_run):
        names = {p.name for p in forward_run.iterdir()}
        assert "beliefs.csv" in names and "learned_matrix_known.csv" not in names

    def test_learn_from_recorded_run(self, forward_run, tmp_path):
        out = tmp_path / "inv"
        assert run_cli("learn", "--run", forward_run, "--mode", "both",
                       "--out", out) == 0
        assert (out / "learned_matrix_known.csv").exists()
        assert (out / "learned_matrix_estimated.csv").exists()
        table = io.read_msd_table(out / "msd.csv")
        assert table["known"].shape == (200,)
        assert np.isfinite(table["known"]).all()

    def test_learn_matches_end_to_end_experiment(self, forward_run, tmp_path):
        exp_out = tmp_path / "e2e"
        assert run_cli("experiment", *BASE, "--mode", "known",
                       "--out", exp_out) == 0
        inv_out = tmp_path / "inv2"
        assert run_cli("learn", "--run", forward_run, "--mode", "known",
                       "--out", inv_out) == 0
        learned_file = io.read_matrix(inv_out / "learned_matrix_known.csv")
        learned_mem = io.read_matrix(exp_out / "learned_matrix_known.csv")
        np.testing.assert_allclose(learned_file, learned_mem, atol=1e-10)

    def test_learn_without_inputs_exits_one(self, tmp_path):
        assert run_cli("learn", "--out", tmp_path / "nope") == 1

    def test_learn_known_mode_needs_trace(self, forward_run, tmp_path):
        (forward_run / "trace.csv").unlink()
        assert run_cli("learn", "--run", forward_run, "--mode", "known",
                       "--out", tmp_path / "kn") == 1

    def test_learn_estimated_without_truth_still_works(self, forward_run, tmp_path):
        (forward_run / "trace.csv").unlink()
        for stale in forward_run.glob("true_*.csv"):
            stale.unlink()
        out = tmp_path / "blind"
        assert run_cli("learn", "--run", forward_run, "--mode", "estimated",
                       "--out", out) == 0
        assert not (out / "msd.csv").exists()


class TestSweepCommand:
    def test_grid_runs_and_prints_table(self, tmp_path, capsys):
        out = tmp_path / "sw"
        assert run_cli("sweep", *BASE, "--mode", "known",
                       "--mu-grid", "0.05,0.02", "--out", out) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert len(lines) == 3
        assert "mu,delta,mode" in capsys.readouterr().out

    def test_sweep_requires_a_grid(self, tmp_path):
        assert run_cli("sweep", *BASE, "--out", tmp_path / "sw") == 1

    def test_divergent_grid_point_exits_three(self, tmp_path):
        assert run_cli("sweep", *BASE, "--mode", "known",
                       "--mu-grid", "0.05,50.0", "--out", tmp_path / "sw") == 3


class TestManifestRoundTrip:
    def test_cli_rerun_reproduces_bundle(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        assert run_cli("experiment", *BASE, "--test-mode", "--out", first) == 0
        assert run_cli("experiment", "--config", first / "manifest.json",
                       "--out", second) == 0
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes()
