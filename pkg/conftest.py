import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-length integrations")
    parser.addoption("--runlong", action="store_true", default=False, help="also run the g = 2000 Gamma sweep point")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-length integration, needs --runslow")
    config.addinivalue_line("markers", "long: slowest sweep point, needs --runlong")


def pytest_collection_modifyitems(config, items):
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    skip_long = pytest.mark.skip(reason="needs --runlong")
    for item in items:
        if "long" in item.keywords and not config.getoption("--runlong"):
            item.add_marker(skip_long)
        elif "slow" in item.keywords and not config.getoption("--runslow"):
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _isolated_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("URP_OUT_DIR", str(tmp_path / "results"))
    monkeypatch.delenv("URP_MAX_DIM", raising=False)
