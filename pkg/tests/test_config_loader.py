"""Tests for ConfigLoader."""

from pathlib import Path

import pytest

from core.config_loader import ConfigLoader


class TestConfigLoaderLoadConfig:
    """Tests for ConfigLoader.load_config()."""

    def test_load_config_json(self, temp_dir):
        """Test loading valid JSON configuration."""
        config_path = Path(temp_dir) / "config.json"
        config_path.write_text('{"theta": 0.75, "T": [50, 100]}', encoding="utf-8")
        result = ConfigLoader.load_config(config_path)
        assert result["theta"] == 0.75
        assert result["T"] == [50, 100]

    def test_load_config_yaml(self, temp_dir):
        """Test loading nested YAML configuration."""
        config_path = Path(temp_dir) / "config.yaml"
        config_path.write_text("schedule:\n  theta: 0.6\nkernel: linear\n", encoding="utf-8")
        result = ConfigLoader.load_config(config_path)
        assert result["schedule"] == {"theta": 0.6}
        assert result["kernel"] == "linear"

    def test_load_config_flat_text(self, temp_dir, flat_config_text):
        """Any other suffix is read as flat key = value text."""
        config_path = Path(temp_dir) / "small.cfg"
        config_path.write_text(flat_config_text, encoding="utf-8")
        result = ConfigLoader.load_config(config_path)
        assert result["kernel"] == "induced(gaussian:0.5)"
        assert result["T"] == "20"
        assert "#" not in "".join(result)

    def test_load_config_file_not_found(self, temp_dir):
        """Test that ValueError is raised when file does not exist."""
        config_path = Path(temp_dir) / "nonexistent.json"
        with pytest.raises(ValueError) as exc_info:
            ConfigLoader.load_config(config_path)
        assert "Configuration file not found" in str(exc_info.value)
        assert "nonexistent" in str(exc_info.value)

    def test_load_config_directory(self, temp_dir):
        with pytest.raises(ValueError, match="not a file"):
            ConfigLoader.load_config(Path(temp_dir))

    def test_load_config_invalid_json(self, temp_dir):
        """Test that ValueError is raised for invalid JSON."""
        config_path = Path(temp_dir) / "config.json"
        config_path.write_text("{ invalid json }", encoding="utf-8")
        with pytest.raises(ValueError) as exc_info:
            ConfigLoader.load_config(config_path)
        assert "Failed to parse configuration file" in str(exc_info.value)

    def test_load_config_invalid_yaml(self, temp_dir):
        """Test that ValueError is raised for invalid YAML."""
        config_path = Path(temp_dir) / "config.yaml"
        config_path.write_text("invalid: yaml: content: [", encoding="utf-8")
        with pytest.raises(ValueError) as exc_info:
            ConfigLoader.load_config(config_path)
        assert "Failed to parse configuration file" in str(exc_info.value)

    def test_load_config_empty_yaml_returns_empty_dict(self, temp_dir):
        """Test that empty YAML returns empty dict (yaml.safe_load returns None)."""
        config_path = Path(temp_dir) / "config.yaml"
        config_path.write_text("", encoding="utf-8")
        assert ConfigLoader.load_config(config_path) == {}

    def test_load_config_rejects_non_mapping(self, temp_dir):
        config_path = Path(temp_dir) / "config.json"
        config_path.write_text("[1, 2, 3]", encoding="utf-8")
        with pytest.raises(ValueError, match="mapping"):
            ConfigLoader.load_config(config_path)


class TestParseFlatText:
    """Tests for the flat key = value format."""

    def test_comments_and_blank_lines(self):
        text = "# header\n\ntheta = 0.75   # trailing\nmodes = opera-direct, pogd\n"
        assert ConfigLoader.parse_flat_text(text) == {
            "theta": "0.75",
            "modes": "opera-direct, pogd",
        }

    def test_missing_equals(self):
        with pytest.raises(ValueError, match="line 2"):
            ConfigLoader.parse_flat_text("theta = 0.7\nT 100\n")

    def test_duplicate_key(self):
        with pytest.raises(ValueError, match="duplicate key 'T'"):
            ConfigLoader.parse_flat_text("T = 10\nT = 20\n")


class TestConfigLoaderOverrides:
    """Tests for CLI override parsing and merging."""

    def test_parse_overrides(self):
        result = ConfigLoader.parse_overrides(["--theta=0.8", "n-trials=3", "--modes=pogd"])
        assert result == {"theta": "0.8", "n_trials": "3", "modes": "pogd"}

    def test_parse_override_without_value(self):
        with pytest.raises(ValueError, match="--key=value"):
            ConfigLoader.parse_overrides(["--theta"])

    def test_merge_precedence(self):
        """CLI beats environment, environment beats the file."""
        merged = ConfigLoader.merge(
            {"run": {"seed": 1, "T": [10]}, "theta": 0.6},
            {"seed": "2"},
            {"theta": "0.9"},
        )
        assert merged == {"seed": "2", "T": [10], "theta": "0.9"}

    def test_merge_drops_log_level(self):
        merged = ConfigLoader.merge({}, {"log_level": "DEBUG"})
        assert "log_level" not in merged


class TestConfigLoaderEnvOverrides:
    """Tests for ConfigLoader.load_env_overrides()."""

    def test_no_env_vars_returns_empty(self, monkeypatch):
        for name in ("OPERA_SEED", "OPERA_OUTPUT_DIR", "OPERA_LOG_LEVEL"):
            monkeypatch.delenv(name, raising=False)
        assert ConfigLoader.load_env_overrides() == {}

    def test_seed_and_output_dir(self, monkeypatch):
        monkeypatch.setenv("OPERA_SEED", " 42 ")
        monkeypatch.setenv("OPERA_OUTPUT_DIR", "/tmp/out")
        monkeypatch.delenv("OPERA_LOG_LEVEL", raising=False)
        assert ConfigLoader.load_env_overrides() == {"seed": "42", "output_dir": "/tmp/out"}

    def test_log_level_is_validated(self, monkeypatch):
        monkeypatch.delenv("OPERA_SEED", raising=False)
        monkeypatch.delenv("OPERA_OUTPUT_DIR", raising=False)
        monkeypatch.setenv("OPERA_LOG_LEVEL", "debug")
        assert ConfigLoader.load_env_overrides() == {"log_level": "DEBUG"}
        monkeypatch.setenv("OPERA_LOG_LEVEL", "chatty")
        assert ConfigLoader.load_env_overrides() == {}
