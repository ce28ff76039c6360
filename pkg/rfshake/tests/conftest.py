import os

import numpy as np
import pytest

from rfshake.tensor_engine import set_default_dtype


def pytest_collection_modifyitems(config, items) -> None:
    if os.environ.get("RFSHAKE_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set RFSHAKE_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _float32_by_default():
    set_default_dtype(np.float32)
    yield
    set_default_dtype(np.float32)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("RFSHAKE_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("RFSHAKE_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path
