"""Shared test fixtures for the MASSIVE toolkit test suite."""
import json
from pathlib import Path

import pytest

from config.settings import get_settings
from massive.particle_model import build_diamond
from massive.scenario import Scenario


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Settings are cached per process; each test sees its own environment."""
    for name in ("MASSIVE_LOG_LEVEL", "MASSIVE_AUDIT_LOG_DIR", "MASSIVE_SWEEP_WORKERS", "MASSIVE_MONTE_CARLO_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def default_scenario():
    """The built-in parameter set."""
    return Scenario()


@pytest.fixture
def default_diamond():
    """1 um diameter diamond at the default density and nitrogen content."""
    return build_diamond(0.5e-6)


@pytest.fixture
def scenario_file(tmp_path):
    """Write scenario text to a temporary file and return its path."""
    def _write(text: str, name: str = "scenario.ini") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def audit_records():
    """Read back every JSONL audit record written under a directory."""
    def _read(log_dir) -> list:
        return [
            json.loads(line)
            for log_file in sorted(Path(log_dir).glob("run_audit_*.jsonl"))
            for line in log_file.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    return _read
