"""
Tests for the command-line entry point.
"""

from __future__ import annotations

import json

import pandas as pd
import pytest

from backend.app.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main
from backend.app.schema.metrics_schema import EPISODE_CSV_COLUMNS

SMALL = ["--preset", "table1", "--episodes", "3", "--set", "node_count=12"]


class TestParser:
    def test_repeatable_sets(self):
        args = build_parser().parse_args(
            ["run", "--preset", "table2", "--set", "rl.epsilon=0.2", "--set", "seed=4"]
        )
        assert args.sets == ["rl.epsilon=0.2", "seed=4"]

    def test_compare_repeatable_sources(self):
        args = build_parser().parse_args(
            ["compare", "--preset", "table1", "--preset", "table2", "--config", "a.json"]
        )
        assert args.preset == ["table1", "table2"]
        assert [str(p) for p in args.config] == ["a.json"]

    def test_unknown_protocol_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--preset", "table1", "--protocol", "OSPF"])


class TestRun:
    def test_writes_outputs(self, tmp_path, capsys):
        code = main(["run", *SMALL, "--protocol", "SPMH", "--seed", "2", "--out", str(tmp_path)])
        assert code == EXIT_OK
        episodes = pd.read_csv(tmp_path / "episodes.csv")
        assert list(episodes.columns) == EPISODE_CSV_COLUMNS
        assert len(episodes) == 3
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["config"]["seed"] == 2
        assert report["config"]["protocol"] == "SPMH"
        assert (tmp_path / "soc_snapshots.csv").exists()
        assert "SPMH seed=2" in capsys.readouterr().out

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WSN_SIM_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["run", *SMALL]) == EXIT_OK
        assert (tmp_path / "env" / "episodes.csv").exists()

    def test_flag_beats_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"preset": "table1", "seed": 1, "node_count": 12, "episodes": 9}))
        assert main(["run", "--config", str(cfg), "--episodes", "2", "--out", str(tmp_path)]) == EXIT_OK
        assert len(pd.read_csv(tmp_path / "episodes.csv")) == 2

    def test_no_config_source(self, tmp_path):
        assert main(["run", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_invalid_value(self, tmp_path):
        code = main(["run", *SMALL, "--set", "rl.gamma=1.5", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_malformed_set(self, tmp_path):
        assert main(["run", *SMALL, "--set", "noequals", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_runtime_failure(self, tmp_path, monkeypatch):
        def broken(_config):
            raise RuntimeError("engine exploded")

        monkeypatch.setattr("backend.app.cli.run_simulation", broken)
        assert main(["run", *SMALL, "--out", str(tmp_path)]) == EXIT_RUNTIME


class TestBatch:
    def test_compare(self, tmp_path):
        code = main(["compare", *SMALL, "--protocols", "MARL", "LEACH", "--seeds", "2", "1",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        summary = pd.read_csv(tmp_path / "compare_summary.csv", dtype={"seed": str})
        assert len(summary) == 2 * 2 + 2
        assert (tmp_path / "compare_episodes.csv").exists()

    def test_compare_configs(self, tmp_path):
        files = []
        for name, radius in (("dense", 30.0), ("sparse", 12.0)):
            path = tmp_path / f"{name}.json"
            path.write_text(json.dumps({"preset": "table1", "name": name, "node_count": 12,
                                        "coverage_radius": radius}))
            files += ["--config", str(path)]
        code = main(["compare", *files, "--episodes", "3", "--protocols", "SPMH", "--seeds", "1",
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_OK
        summary = pd.read_csv(tmp_path / "out" / "compare_summary.csv", dtype={"seed": str})
        assert sorted(summary["config"]) == ["dense", "sparse"]
        assert set(summary["protocol"]) == {"SPMH"}

    def test_compare_needs_two_cells_per_seed(self, tmp_path):
        code = main(["compare", *SMALL, "--protocols", "SPMH", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_sweep(self, tmp_path):
        code = main(["sweep", *SMALL, "--lambdas", "0.2", "0.8", "--alphas", "0.1", "0.5",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert len(pd.read_csv(tmp_path / "sweep.csv")) == 4


class TestExport:
    def test_formats(self, tmp_path):
        run_dir = tmp_path / "run"
        assert main(["run", *SMALL, "--set", "snapshot_episodes=[0,2]", "--out", str(run_dir)]) == EXIT_OK
        report = run_dir / "report.json"

        csv_out = tmp_path / "again.csv"
        assert main(["export", "--report", str(report), "--format", "csv", "--out", str(csv_out)]) == EXIT_OK
        assert csv_out.read_bytes() == (run_dir / "episodes.csv").read_bytes()

        snap_out = tmp_path / "snap.csv"
        code = main(["export", "--report", str(report), "--format", "snapshots",
                     "--checkpoints", "0", "2", "--out", str(snap_out)])
        assert code == EXIT_OK
        assert len(pd.read_csv(snap_out)) == 2 * 12

    def test_missing_checkpoint_is_runtime_error(self, tmp_path):
        run_dir = tmp_path / "run"
        main(["run", *SMALL, "--out", str(run_dir)])
        code = main(["export", "--report", str(run_dir / "report.json"), "--format", "snapshots",
                     "--checkpoints", "50", "--out", str(tmp_path / "s.csv")])
        assert code == EXIT_RUNTIME
