"""Tests for configuration: environment settings and run config files."""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import importlib
import json

import pytest

import config
from core.errors import ConfigError
from core.run_config import DataConfig, RunConfig, apply_overrides, load_run_config, write_resolved
from network.architecture import preset


def _reload_with(monkeypatch, **env):
    for key, value in env.items():
        monkeypatch.setenv(key, value)
    try:
        return importlib.reload(config)
    finally:
        for key in env:
            monkeypatch.delenv(key, raising=False)


def test_config_defaults():
    """Test that the training protocol defaults are set correctly."""
    assert config.LEARNING_RATE == 0.001
    assert config.MOMENTUM == 0.9
    assert config.WEIGHT_DECAY == 0.00005
    assert config.BATCH_SIZE == 2
    assert config.TRAIN_FRACTION == 0.9
    assert config.LOG_CLAMP == 1e-12


def test_invalid_precision_rejected(monkeypatch):
    """Test that MICRONET_PRECISION only accepts float32 and float64."""
    try:
        with pytest.raises(ValueError):
            _reload_with(monkeypatch, MICRONET_PRECISION="float16")
    finally:
        importlib.reload(config)


def test_postgres_url_normalized(monkeypatch):
    """Test that postgres:// URLs are rewritten for SQLAlchemy."""
    try:
        reloaded = _reload_with(monkeypatch, DATABASE_URL="postgres://u:p@host/db")
        assert reloaded.DATABASE_URL == "postgresql://u:p@host/db"
    finally:
        importlib.reload(config)


# -- run config files -------------------------------------------------------------

def test_run_config_json_is_fixed_point():
    """Test that to_json then from_dict reproduces the config."""
    run = RunConfig(name="x", architecture=preset("bm3"))
    assert RunConfig.from_dict(json.loads(run.to_json())) == run


def test_architecture_by_preset_name():
    """Test that the architecture section may name a preset."""
    run = RunConfig.from_dict({"architecture": "bm2", "training": {"epochs": 3}})
    assert run.architecture == preset("bm2")
    assert run.training.epochs == 3
    assert run.training.learning_rate == config.LEARNING_RATE


@pytest.mark.parametrize("data", [
    {"optimizer": {}},
    {"training": {"lr": 0.1}},
    {"data": {"folder": "x"}},
    {"architecture": 7},
    {"data": {"train_fraction": 1.5}},
])
def test_run_config_rejects_bad_sections(data):
    """Test unknown sections, unknown keys and out-of-range values."""
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_load_run_config_reports_position(tmp_path):
    """Test that malformed JSON names the file and line."""
    path = tmp_path / "run.json"
    path.write_text('{\n  "name": "x",\n}')
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert "run.json:3" in str(info.value)


def test_overrides_win_over_file():
    """Test that flag overrides replace file values and None leaves them alone."""
    run = RunConfig.from_dict({"training": {"epochs": 5, "seed": 1}})
    resolved = apply_overrides(run, {"training.epochs": 2, "training.seed": None, "data.data_dir": "d"})
    assert resolved.training.epochs == 2
    assert resolved.training.seed == 1
    assert resolved.data == DataConfig(data_dir="d")
    with pytest.raises(ConfigError):
        apply_overrides(run, {"model.depth": 3})


def test_write_resolved(tmp_path):
    """Test that the resolved snapshot loads back equal."""
    run = RunConfig(name="snap")
    path = write_resolved(run, tmp_path / "out")
    assert path.name == "resolved_config.json"
    assert load_run_config(path) == run
