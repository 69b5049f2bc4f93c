"""Tests for environment settings and TOML run configuration."""

import os
from unittest.mock import patch

import pytest

from ..gbc_mass.errors import ConfigError
from ..gbc_mass.settings import (
    RunConfig,
    Settings,
    build_run_config,
    load_run_config,
    read_toml,
    set_path,
)

LOAD_DOTENV = "lessons.lab_0001_gbc_mass.gbc_mass.settings.load_dotenv"


@pytest.fixture
def settings():
    with patch(LOAD_DOTENV), patch.dict(os.environ, {}, clear=True):
        yield Settings()


class TestSettings:
    """Test cases for the Settings class."""

    def test_init_with_default_env_file(self):
        """Test that the default .env lookup is used."""
        with patch(LOAD_DOTENV) as mock_load_dotenv:
            Settings()
            mock_load_dotenv.assert_called_once_with()

    def test_init_with_custom_env_file(self):
        """Test that a custom .env file is forwarded."""
        with patch(LOAD_DOTENV) as mock_load_dotenv:
            Settings(env_file="/path/to/custom/.env")
            mock_load_dotenv.assert_called_once_with("/path/to/custom/.env")

    def test_defaults(self, settings):
        """Test defaults with an empty environment."""
        with patch.dict(os.environ, {}, clear=True):
            assert settings.threads == 1
            assert settings.output_dir == "reports"
            assert settings.nodes_per_angle == 16
            assert settings.log_level == "INFO"
            assert settings.constant_variant == "proof"

    def test_values_from_environment(self, settings):
        """Test that environment variables override the defaults."""
        env = {
            "GBC_THREADS": "4",
            "GBC_NODES_PER_ANGLE": "6",
            "GBC_LOG_LEVEL": "debug",
            "GBC_CONSTANT_VARIANT": "printed",
        }
        with patch.dict(os.environ, env, clear=True):
            assert settings.threads == 4
            assert settings.nodes_per_angle == 6
            assert settings.log_level == "DEBUG"
            assert settings.constant_variant == "printed"

    def test_invalid_constant_variant(self, settings):
        """Test ValueError for an unknown constant variant."""
        with patch.dict(os.environ, {"GBC_CONSTANT_VARIANT": "other"}):
            with pytest.raises(ValueError, match="GBC_CONSTANT_VARIANT"):
                settings.constant_variant


class TestBuildRunConfig:
    """Test validation of raw config tables."""

    def test_minimal_config(self, settings):
        """Test that a model name alone yields the defaults."""
        config = build_run_config({"model": {"name": "flat"}}, settings)
        assert isinstance(config, RunConfig)
        assert config.q == 1
        assert config.methods == ("coordinate-adm",)
        assert config.identity.radii == (25.0, 50.0, 100.0, 200.0)
        assert config.identity.nodes_per_angle == 16
        assert config.identity.constant_variant == "proof"
        assert config.checks is None
        assert config.riemann_sign == 1.0

    def test_model_parameters_and_ladder(self, settings):
        """Test that model parameters and a geometric ladder are read."""
        data = {
            "model": {"name": "schwarzschild", "m": 2.0},
            "run": {"methods": "lovelock-flux", "fit_exponent": 1.0},
            "ladder": {"rho0": 10.0, "rungs": 5},
        }
        config = build_run_config(data, settings)
        assert config.model.parameters == {"m": 2.0}
        assert config.methods == ("lovelock-flux",)
        assert config.identity.radii == (10.0, 20.0, 40.0, 80.0, 160.0)
        assert config.identity.fit_exponent_hint == 1.0

    def test_flip_sign(self, settings):
        """Test the debug sign flag."""
        data = {
            "model": {"name": "sphere-cap"},
            "run": {"flip_riemann_sign": True, "checks": ["gauss_relation"]},
            "ladder": {"radii": [0.2, 0.4, 0.6]},
        }
        config = build_run_config(data, settings)
        assert config.riemann_sign == -1.0
        assert config.checks == ("gauss_relation",)

    @pytest.mark.parametrize(
        "data, field",
        [
            ({}, "model.name"),
            ({"model": {"name": "nope"}}, "model"),
            ({"model": {"name": "flat"}, "run": {"q": 2}}, "run.q"),
            ({"model": {"name": "flat"}, "run": {"q": "1"}}, "run.q"),
            ({"model": {"name": "flat"}, "run": {"methods": ["magic"]}}, "run.methods"),
            ({"model": {"name": "flat"}, "run": {"methods": []}}, "run.methods"),
            ({"model": {"name": "flat"}, "ladder": {"radii": [1.0, 2.0]}}, "ladder.radii"),
            ({"model": {"name": "flat"}, "ladder": {"radii": [3.0, 2.0, 4.0]}}, "ladder.radii"),
            ({"model": {"name": "sphere-cap"}}, "ladder.radii"),
            (
                {"model": {"name": "flat"}, "run": {"correction_terms": 4}},
                "run.correction_terms",
            ),
            (
                {"model": {"name": "flat"}, "run": {"flip_riemann_sign": "yes"}},
                "run.flip_riemann_sign",
            ),
            ({"model": {"name": "flat"}, "run": {"checks": ["bogus"]}}, "run.checks"),
            ({"model": {"name": "flat"}, "run": {"constant": "other"}}, "run.constant"),
            ({"model": {"name": "flat"}, "tolerances": {"rtol": -1.0}}, "tolerances.rtol"),
            ({"model": {"name": "flat"}, "run": "q=1"}, "run"),
        ],
    )
    def test_invalid_fields(self, settings, data, field):
        """Test that validation errors name the offending field."""
        with pytest.raises(ConfigError) as excinfo:
            build_run_config(data, settings)
        assert excinfo.value.field == field
        assert excinfo.value.exit_code == 2


class TestLoadRunConfig:
    """Test reading TOML files and applying overrides."""

    def test_read_toml(self, tmp_path):
        """Test parsing a valid file."""
        path = tmp_path / "run.toml"
        path.write_text('[model]\nname = "flat"\n')
        assert read_toml(path) == {"model": {"name": "flat"}}

    def test_missing_file(self, tmp_path):
        """Test ConfigError for a missing file."""
        with pytest.raises(ConfigError, match="not found"):
            read_toml(tmp_path / "missing.toml")

    def test_malformed_file_reports_line(self, tmp_path):
        """Test that syntax errors carry their line number."""
        path = tmp_path / "bad.toml"
        path.write_text('[model]\nname = "flat"\nq = = 2\n')
        with pytest.raises(ConfigError) as excinfo:
            read_toml(path)
        assert excinfo.value.line == 3
        assert "line 3" in str(excinfo.value)

    def test_overrides_take_precedence(self, tmp_path, settings):
        """Test that dotted overrides replace file values."""
        path = tmp_path / "run.toml"
        path.write_text('[model]\nname = "flat"\nn = 5\n\n[run]\nq = 1\n')
        config = load_run_config(
            path, {"run.q": 2, "output.dir": str(tmp_path), "run.threads": None}, settings
        )
        assert config.q == 2
        assert config.output_dir == str(tmp_path)
        assert config.identity.threads == 1

    def test_overrides_without_file(self, settings):
        """Test building a config from overrides alone."""
        config = load_run_config(None, {"model.name": "flat"}, settings)
        assert config.model.name == "flat"

    def test_set_path_creates_tables(self):
        """Test nested table creation."""
        data = {}
        set_path(data, "run.q", 2)
        assert data == {"run": {"q": 2}}

    def test_set_path_through_non_table(self):
        """Test ConfigError when a parent key is not a table."""
        with pytest.raises(ConfigError) as excinfo:
            set_path({"run": 3}, "run.q", 2)
        assert excinfo.value.field == "run"
