# tests/conftest.py

from unittest.mock import MagicMock

import numpy as np
import pytest

from dirichlet_wrapper.console_manager import NullConsole, console_proxy
from dirichlet_wrapper.logger import reset_logging


@pytest.fixture(autouse=True)
def isolated_dirs(mocker, tmp_path, monkeypatch):
    """
    Points the user config/data/log directories at tmp_path and clears DW_SEED,
    so no test touches the real user directories or inherits a seed.
    """
    mock_appdirs_instance = MagicMock()
    mock_appdirs_instance.user_config_dir = str(tmp_path / "config")
    mock_appdirs_instance.user_data_dir = str(tmp_path / "data")
    mock_appdirs_instance.user_log_dir = str(tmp_path / "logs")
    mocker.patch("dirichlet_wrapper.config.AppDirs", return_value=mock_appdirs_instance)
    monkeypatch.delenv("DW_SEED", raising=False)
    yield {
        "config_dir": tmp_path / "config",
        "data_dir": tmp_path / "data",
        "log_dir": tmp_path / "logs",
    }
    reset_logging()


@pytest.fixture
def quiet_console():
    """Swaps in the NullConsole for the duration of a test."""
    previous = console_proxy.console
    console_proxy.set_console(NullConsole())
    yield
    console_proxy.set_console(previous)


@pytest.fixture
def log_messages():
    """Collects loguru messages (level, text) emitted during a test."""
    from loguru import logger

    messages = []
    sink_id = logger.add(lambda m: messages.append((m.record["level"].name, m.record["message"])), level="DEBUG")
    yield messages
    logger.remove(sink_id)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
