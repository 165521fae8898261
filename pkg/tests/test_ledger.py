"""Tests for the run ledger."""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

import json

import pytest

from core.errors import ConfigError
from training.ledger import RunLedger


def test_run_lifecycle(tmp_path):
    """Test start, per-epoch records and finish of a run."""
    ledger = RunLedger(tmp_path)
    run_id = ledger.start_run("first", "MICRO", 7, {"training": {"epochs": 2}})
    assert run_id is not None
    ledger.record_epoch(run_id, 1, 0.6, 0.5, 0.8, 0.0)
    ledger.record_epoch(run_id, 2, 0.4, None, None, 0.0)
    ledger.finish_run(run_id, "completed", 0.4)

    runs = ledger.list_runs()
    assert len(runs) == 1
    assert runs[0]["name"] == "first"
    assert runs[0]["seed"] == "7"
    assert runs[0]["status"] == "completed"
    assert runs[0]["epochs"] == 2
    assert runs[0]["final_loss"] == 0.4
    assert runs[0]["final_miou"] is None

    epochs = ledger.get_epochs(run_id)
    assert [e["epoch"] for e in epochs] == [1, 2]
    assert epochs[0]["miou"] == 0.5


def test_ledger_file_lives_in_run_directory(tmp_path):
    """Test that the default ledger is a SQLite file inside the output directory."""
    RunLedger(tmp_path / "out").start_run("x", "BM2", 0, {})
    assert (tmp_path / "out" / "runs.db").is_file()


def test_runs_listed_oldest_first(tmp_path):
    """Test ordering across several runs and reopening the same ledger."""
    first = RunLedger(tmp_path)
    a = first.start_run("a", "MICRO", 0, {})
    b = first.start_run("b", "MICRO", 1, {})
    assert a < b
    assert [r["name"] for r in RunLedger(tmp_path).list_runs()] == ["a", "b"]


def test_seed_beyond_sqlite_integer_range(tmp_path):
    """Test that a full unsigned 64-bit seed is stored exactly."""
    ledger = RunLedger(tmp_path)
    ledger.start_run("big", "MICRO", 2 ** 64 - 1, {})
    assert ledger.list_runs()[0]["seed"] == str(2 ** 64 - 1)


def test_missing_run_is_ignored(tmp_path):
    """Test that epochs and finishes for an unknown or unrecorded run do nothing."""
    ledger = RunLedger(tmp_path)
    ledger.record_epoch(None, 1, 0.1, None, None, 0.0)
    ledger.finish_run(None, "completed")
    ledger.finish_run(999, "completed")
    assert ledger.list_runs() == []


def test_check_ledger_diagnostic(tmp_path, capsys):
    """Test that the diagnostic script finds the tables and lists a recorded run."""
    import check_ledger

    RunLedger(tmp_path).start_run("diag", "MICRO", 3, {})
    assert check_ledger.main([str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "Successfully connected" in out
    assert "#1 diag (MICRO, seed 3)" in out


def test_unreachable_database_does_not_raise_on_writes(tmp_path):
    """Test that a ledger whose database cannot be opened logs and drops every write."""
    ledger = RunLedger(url=f"sqlite:///{tmp_path}/absent/sub/runs.db")
    assert ledger.start_run("x", "MICRO", 0, {}) is None
    ledger.record_epoch(1, 1, 0.5, None, None, 0.0)
    ledger.finish_run(1, "completed", 0.5)


def test_unreachable_database_reads_are_config_errors(tmp_path):
    """Test that listing runs from an unopenable ledger is a configuration error."""
    ledger = RunLedger(url=f"sqlite:///{tmp_path}/absent/sub/runs.db")
    with pytest.raises(ConfigError):
        ledger.list_runs()


def test_training_survives_unreachable_ledger(tmp_path, monkeypatch, capsys):
    """Test that train completes and writes its checkpoint when DATABASE_URL is unusable."""
    import config
    import micronet
    from tests.test_cli import TINY_RUN

    monkeypatch.setattr(config, "DATABASE_URL", f"sqlite:///{tmp_path}/absent/sub/runs.db")
    path = tmp_path / "run.json"
    path.write_text(json.dumps(TINY_RUN))
    out = tmp_path / "out"
    assert micronet.main(["train", "--config", str(path), "--out", str(out)]) == micronet.EXIT_OK
    assert (out / "checkpoint.mnck").is_file()
    assert micronet.main(["runs", "--out", str(out)]) == micronet.EXIT_USAGE
