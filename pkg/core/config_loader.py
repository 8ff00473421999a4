"""Configuration file loader: reads config files, CLI overrides and environment.

Override hierarchy (highest priority wins):
  1. CLI overrides       – ``--theta=0.75`` / ``theta=0.75`` tokens after the config path.
  2. Environment         – ``OPERA_SEED``, ``OPERA_OUTPUT_DIR``.
  3. Config file values  – YAML, JSON or the flat ``key = value`` text format.
  4. Hardcoded defaults in the ``ExperimentConfig`` dataclasses.

``OPERA_LOG_LEVEL`` is read here too but only consumed by the logger setup.
"""

import json
import os
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

try:
    import yaml
except ImportError:
    yaml = None

from core import constants
from core.config import flatten


class ConfigLoader:
    """Loads and merges experiment configuration sources.

    Stateless: all methods are ``@staticmethod``.  The class is used as a namespace
    to group the load → override → merge pipeline.
    """

    @staticmethod
    def load_env_overrides() -> dict[str, Any]:
        """Read OPERA_* environment variables and return them as a config dict.

        Supported variables:
            OPERA_SEED        – base seed of the trials
            OPERA_OUTPUT_DIR  – output directory
            OPERA_LOG_LEVEL   – log level override (DEBUG, INFO, WARNING, ERROR)

        Returns:
            Dictionary with config values derived from environment variables.
        """
        overrides: dict[str, Any] = {}

        seed = os.environ.get(constants.ENV_SEED)
        if seed:
            overrides["seed"] = seed.strip()

        output_dir = os.environ.get(constants.ENV_OUTPUT_DIR)
        if output_dir:
            overrides["output_dir"] = output_dir

        log_level = os.environ.get(constants.ENV_LOG_LEVEL)
        if log_level and log_level.upper() in {
            "DEBUG",
            "INFO",
            "WARNING",
            "ERROR",
            "CRITICAL",
        }:
            overrides["log_level"] = log_level.upper()

        return overrides

    @staticmethod
    def parse_flat_text(text: str) -> dict[str, str]:
        """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped.

        Raises:
            ValueError: On a line without ``=`` or a repeated key.
        """
        values: dict[str, str] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ValueError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
            if key in values:
                raise ValueError(f"line {number}: duplicate key '{key}'")
            values[key] = value.strip()
        return values

    @staticmethod
    def load_config(config_path: Path) -> dict[str, Any]:
        """Load configuration from file.

        Args:
            config_path: Path to a ``.yaml``/``.yml``, ``.json`` or flat text file

        Returns:
            Dictionary with configuration values

        Raises:
            ValueError: If the file is missing, unreadable or cannot be parsed
        """
        if not config_path.exists():
            raise ValueError(f"Configuration file not found: {config_path}")
        if not config_path.is_file():
            raise ValueError(f"Configuration path is not a file: {config_path}")

        suffix = config_path.suffix.lower()

        try:
            text = config_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise ValueError(f"Failed to read configuration file: {e}") from e

        if suffix in (".yaml", ".yml"):
            if yaml is None:
                raise ValueError(
                    "YAML support requires PyYAML. Install with: pip install pyyaml"
                )
            try:
                loaded = yaml.safe_load(text) or {}
            except yaml.YAMLError as e:
                raise ValueError(f"Failed to parse configuration file: {e}") from e
        elif suffix == ".json":
            try:
                loaded = json.loads(text)
            except json.JSONDecodeError as e:
                raise ValueError(f"Failed to parse configuration file: {e}") from e
        else:
            loaded = ConfigLoader.parse_flat_text(text)

        if not isinstance(loaded, Mapping):
            raise ValueError("Configuration file must contain a mapping of keys to values")
        return dict(loaded)

    @staticmethod
    def parse_overrides(args: Iterable[str]) -> dict[str, str]:
        """Turn ``--key=value`` / ``key=value`` tokens into a mapping.

        Dashes in keys become underscores, so ``--n-trials=5`` sets ``n_trials``.

        Raises:
            ValueError: For a token without ``=``.
        """
        overrides: dict[str, str] = {}
        for token in args:
            body = token[2:] if token.startswith("--") else token
            key, sep, value = body.partition("=")
            if not sep or not key.strip():
                raise ValueError(f"Override must look like --key=value, got {token!r}")
            overrides[key.strip().replace("-", "_")] = value.strip()
        return overrides

    @staticmethod
    def merge(
        file_values: Mapping[str, Any],
        env_values: Mapping[str, Any] | None = None,
        cli_values: Mapping[str, Any] | None = None,
    ) -> dict[str, Any]:
        """Merge sources with precedence CLI > env > file.

        ``log_level`` is dropped: it configures logging, not the experiment.
        """
        merged = flatten(file_values)
        for source in (env_values or {}, cli_values or {}):
            merged.update(flatten(source))
        merged.pop("log_level", None)
        return merged
