import hypothesis
import numpy as np
import pytest

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    """An empty table cache; ULAB_CACHE is cleared so nothing leaks in from the environment."""
    monkeypatch.delenv("ULAB_CACHE", raising=False)
    path = tmp_path / "tables"
    path.mkdir()
    return path


@pytest.fixture(autouse=True)
def _no_env_overrides(monkeypatch):
    for key in ("ULAB_CACHE", "ULAB_BUDGET", "ULAB_WORKERS", "ULAB_MAX_TABLE"):
        monkeypatch.delenv(key, raising=False)
