"""
Tests for preset, file and override resolution.
"""

from __future__ import annotations

import json

import pytest

from backend.app.config.loader import PRESET_NAMES, load_config, output_dir
from backend.app.engine.errors import ConfigurationError
from backend.app.schema.config_schema import ComputeMode, Protocol, SimConfig


def _write(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


class TestPresets:
    def test_table1(self):
        config = load_config(preset="table1")
        assert config.region.extents == (100.0, 100.0)
        assert config.node_count == 50
        assert config.coverage_radius == 9.0
        assert config.costs.hop_cost == 2.0
        assert config.costs.sink_cost == 8.0

    def test_table2(self):
        config = load_config(preset="table2")
        assert config.region.dimensions == 3
        assert config.region.extents == (10.0, 10.0, 10.0)
        assert config.node_count == 100
        assert config.sources_per_episode == 10

    def test_model_default_sources(self):
        assert SimConfig.model_fields["sources_per_episode"].default == 10

    def test_delay_study_timing(self):
        delay = load_config(preset="delay_study").delay
        assert delay.processing_s == 0.004
        assert delay.service_rate == 20.0

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_every_preset_validates(self, name):
        assert load_config(preset=name).name == name

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError, match="unknown preset"):
            load_config(preset="table9")


class TestFiles:
    def test_empty_file_names_missing_keys(self, tmp_path):
        with pytest.raises(ConfigurationError) as info:
            load_config(_write(tmp_path, ""))
        message = str(info.value)
        for key in ("region", "node_count", "coverage_radius"):
            assert key in message

    def test_unknown_key_named(self, tmp_path):
        path = _write(tmp_path, {"preset": "table1", "rl": {"epsilonn": 0.2}})
        with pytest.raises(ConfigurationError, match="rl.epsilonn"):
            load_config(path)

    def test_bad_json(self, tmp_path):
        with pytest.raises(ConfigurationError, match="invalid JSON"):
            load_config(_write(tmp_path, "{nope"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_file_preset_key(self, tmp_path):
        path = _write(tmp_path, {"preset": "table2", "episodes": 10})
        config = load_config(path)
        assert config.node_count == 100
        assert config.episodes == 10


class TestPrecedence:
    def test_override_beats_file_beats_preset(self, tmp_path):
        path = _write(tmp_path, {"seed": 3, "rl": {"epsilon": 0.2}, "mode": "Cloud"})
        config = load_config(path, preset="table1", overrides={"seed": 9, "protocol": "SPMH"})
        assert config.seed == 9
        assert config.rl.epsilon == 0.2
        assert config.rl.alpha == 0.1
        assert config.mode is ComputeMode.CLOUD
        assert config.protocol is Protocol.SPMH
        assert config.node_count == 50

    def test_dotted_override_keeps_siblings(self):
        config = load_config(preset="table1", overrides={"costs.hop_cost": 3.0})
        assert config.costs.hop_cost == 3.0
        assert config.costs.sink_cost == 8.0

    def test_invalid_override(self):
        with pytest.raises(ConfigurationError, match="fusion_lambda"):
            load_config(preset="table1", overrides={"routing.fusion_lambda": 2.0})


def test_output_dir_from_env(monkeypatch, tmp_path):
    monkeypatch.setenv("WSN_SIM_OUTPUT_DIR", str(tmp_path))
    assert output_dir() == tmp_path
