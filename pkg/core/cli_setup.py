import logging
import os
import re

from core import constants

_PACKAGES = ("core", "theory")
_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


def sanitize_outslug(name: str) -> str:
    """Strip characters that could move an output file out of its directory."""
    safe = re.sub(r"[/\\<>:\"|?*\x00-\x1f]", "_", name).strip()
    return safe or "opera"


def prepare_output_dir(output_dir: str | None) -> str:
    """Create the output directory and return it with a trailing separator."""
    resolved = output_dir or constants.OUTPUT_DIR
    if not resolved.endswith(os.sep):
        resolved += os.sep
    os.makedirs(resolved, exist_ok=True)
    return resolved


def setup_logger(
    output_dir: str | None,
    outslug: str = "opera",
    verbose: bool = False,
    quiet: bool = False,
) -> logging.Logger:
    """Setup logging for the ``core`` and ``theory`` packages.

    Args:
        output_dir: Directory receiving ``<outslug>_log.txt``
        outslug: Slug for log file name
        verbose: DEBUG level with console output
        quiet: Only errors

    Returns:
        The ``core`` package logger
    """
    if quiet:
        log_level = logging.ERROR
    elif verbose:
        log_level = logging.DEBUG
    else:
        log_level = logging.INFO

    env_level = os.environ.get(constants.ENV_LOG_LEVEL, "").upper()
    if env_level in _LEVELS:
        log_level = getattr(logging, env_level)

    formatter = logging.Formatter(_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    resolved_output_dir = prepare_output_dir(output_dir)
    file_handler = logging.FileHandler(
        resolved_output_dir + sanitize_outslug(outslug) + "_log.txt", encoding="utf-8"
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(formatter)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)

    for package in _PACKAGES:
        logger = logging.getLogger(package)
        # repeated invocations in one process must not stack handlers
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.setLevel(log_level)
        logger.addHandler(file_handler)
        if not quiet:
            logger.addHandler(console_handler)

    return logging.getLogger(_PACKAGES[0])
