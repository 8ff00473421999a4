"""Tests for output directory and logging setup."""

import logging
import os

import pytest

from core import cli_setup, constants


@pytest.fixture
def reset_logging():
    yield
    for package in ("core", "theory"):
        logger = logging.getLogger(package)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.setLevel(logging.NOTSET)


class TestSetup:
    """Tests for setup functionality."""

    def test_constants_exist(self):
        """Test that constants are properly defined."""
        assert isinstance(constants.VERSION, str)
        assert isinstance(constants.OUTPUT_DIR, str)
        assert constants.EXIT_SUCCESS == 0
        assert constants.EXIT_GENERAL_ERROR == 1
        assert constants.EXIT_INVALID_ARGUMENTS == 2

    @pytest.mark.parametrize(
        "name,expected",
        [("opera", "opera"), ("../up", ".._up"), ("a:b*c", "a_b_c"), ("  ", "opera")],
    )
    def test_sanitize_outslug(self, name, expected):
        assert cli_setup.sanitize_outslug(name) == expected

    def test_prepare_output_dir(self, tmp_path):
        target = str(tmp_path / "nested" / "out")
        resolved = cli_setup.prepare_output_dir(target)
        assert resolved.endswith(os.sep)
        assert os.path.isdir(target)


class TestSetupLogger:
    """Tests for setup_logger()."""

    def test_levels(self, tmp_path, monkeypatch, reset_logging):
        monkeypatch.delenv(constants.ENV_LOG_LEVEL, raising=False)
        assert cli_setup.setup_logger(str(tmp_path)).level == logging.INFO
        assert cli_setup.setup_logger(str(tmp_path), verbose=True).level == logging.DEBUG
        assert cli_setup.setup_logger(str(tmp_path), quiet=True).level == logging.ERROR
        assert logging.getLogger("theory").level == logging.ERROR

    def test_env_overrides_level(self, tmp_path, monkeypatch, reset_logging):
        monkeypatch.setenv(constants.ENV_LOG_LEVEL, "warning")
        assert cli_setup.setup_logger(str(tmp_path), verbose=True).level == logging.WARNING

    def test_writes_log_file(self, tmp_path, monkeypatch, reset_logging):
        monkeypatch.delenv(constants.ENV_LOG_LEVEL, raising=False)
        logger = cli_setup.setup_logger(str(tmp_path), "run1", quiet=True)
        logger.error("step failed")
        for handler in logger.handlers:
            handler.flush()
        text = (tmp_path / "run1_log.txt").read_text(encoding="utf-8")
        assert "ERROR - step failed" in text

    def test_repeated_setup_does_not_stack_handlers(self, tmp_path, monkeypatch, reset_logging):
        monkeypatch.delenv(constants.ENV_LOG_LEVEL, raising=False)
        cli_setup.setup_logger(str(tmp_path))
        logger = cli_setup.setup_logger(str(tmp_path))
        assert len(logger.handlers) == 2
