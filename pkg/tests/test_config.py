"""Tests for numeric settings and run-config loading."""

import json
from dataclasses import replace
from pathlib import Path

import pytest

from leontief_mech.config import (
    CONFIG_ENV_VAR,
    DEFAULT_NUMERICS,
    NumericConfig,
    RunConfig,
    load_run_config,
    resolve_config_path,
    run_config_from_dict,
)
from leontief_mech.errors import ConfigError


class TestNumericConfig:
    """Test range checks on tolerances and resolutions."""

    def test_defaults_validate(self) -> None:
        """Should accept the shipped defaults."""
        assert DEFAULT_NUMERICS.validate() is DEFAULT_NUMERICS

    @pytest.mark.parametrize(
        ("changes", "key"),
        [
            ({"k_floor": 0.0}, "k_floor"),
            ({"k_floor": 0.9}, "k_floor"),
            ({"quad_nodes_1d": 2}, "quad_nodes_1d"),
            ({"root_tol": 0.0}, "root_tol"),
            ({"ic_tol": -1e-9}, "ic_tol"),
            ({"workers": 0}, "workers"),
        ],
    )
    def test_bad_values_name_their_key(self, changes: dict[str, float], key: str) -> None:
        """Should raise ConfigError naming the offending setting."""
        with pytest.raises(ConfigError) as excinfo:
            replace(DEFAULT_NUMERICS, **changes).validate()
        assert excinfo.value.key == key


class TestRunConfig:
    """Test run-level validation and dictionary parsing."""

    def test_unknown_family_is_rejected(self) -> None:
        """Should reject a distribution family that does not exist."""
        with pytest.raises(ConfigError, match="unknown family"):
            RunConfig(distribution={"family": "Pareto"}).validate()

    def test_missing_family_is_rejected(self) -> None:
        """Should reject a distribution without a family."""
        with pytest.raises(ConfigError, match="missing"):
            RunConfig(distribution={}).validate()

    def test_small_verify_grid_is_rejected(self) -> None:
        """Should reject a verification mesh below the minimum resolution."""
        with pytest.raises(ConfigError) as excinfo:
            RunConfig(verify_grid=2).validate()
        assert excinfo.value.key == "verify_grid"

    def test_dict_round_trip(self) -> None:
        """Should rebuild an equal config from its own serialization."""
        config = RunConfig(
            distribution={"family": "Example2"},
            numerics=NumericConfig(k_floor=0.01, workers=2),
            verify_grid=30,
            seed=7,
        )
        assert run_config_from_dict(config.to_dict()) == config

    def test_unknown_keys_are_rejected(self) -> None:
        """Should name unknown top-level and numerics keys."""
        with pytest.raises(ConfigError, match="'colour'"):
            run_config_from_dict({"colour": "red"})
        with pytest.raises(ConfigError, match="'numerics.speed'"):
            run_config_from_dict({"numerics": {"speed": 3}})

    def test_numeric_values_are_coerced(self) -> None:
        """Should coerce numeric strings to the declared field types."""
        config = run_config_from_dict({"numerics": {"quad_nodes_1d": "301", "ic_tol": "1e-8"}, "seed": "4"})
        assert config.numerics.quad_nodes_1d == 301
        assert config.numerics.ic_tol == 1e-8
        assert config.seed == 4

    def test_uncoercible_values_are_rejected(self) -> None:
        """Should reject values that cannot be converted."""
        with pytest.raises(ConfigError, match="expected float"):
            run_config_from_dict({"numerics": {"ic_tol": "tight"}})
        with pytest.raises(ConfigError, match="expected an object"):
            run_config_from_dict({"numerics": [1, 2]})


class TestResolveConfigPath:
    """Test config path resolution."""

    def test_argument_wins(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Should prefer the command-line path over the environment."""
        monkeypatch.setenv(CONFIG_ENV_VAR, "/env/run.json")
        assert resolve_config_path("cli.json") == Path("cli.json")

    def test_environment_fallback(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Should fall back to LMECH_CONFIG."""
        monkeypatch.setenv(CONFIG_ENV_VAR, "/env/run.json")
        assert resolve_config_path(None) == Path("/env/run.json")

    def test_no_config(self) -> None:
        """Should return None when neither is given."""
        assert resolve_config_path(None) is None


class TestLoadRunConfig:
    """Test file loading and flag overrides."""

    def test_defaults_without_file(self) -> None:
        """Should return the default config when no file is given."""
        config = load_run_config(None)
        assert config.distribution == {"family": "Uniform"}
        assert config.verify_grid == 50

    def test_missing_file(self, tmp_path: Path) -> None:
        """Should raise a config error for a missing file."""
        with pytest.raises(ConfigError, match="file not found"):
            load_run_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path: Path) -> None:
        """Should raise a config error for malformed JSON."""
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_run_config(path)

    def test_non_object_json(self, tmp_path: Path) -> None:
        """Should require a JSON object at the top level."""
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="must be an object"):
            load_run_config(path)

    def test_overrides_replace_file_values(self, tmp_path: Path) -> None:
        """Should let flags override file values and ignore unset flags."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"distribution": {"family": "Example1"}, "verify_grid": 20, "seed": 3}))
        config = load_run_config(
            path, {"family": "Example2", "k_floor": 0.01, "tol": 1e-7, "verify_grid": 30, "seed": None, "out_dir": "out"}
        )
        assert config.distribution == {"family": "Example2"}
        assert config.numerics.k_floor == 0.01
        assert config.numerics.ic_tol == 1e-7
        assert config.verify_grid == 30
        assert config.seed == 3
        assert config.out_dir == "out"

    def test_overrides_are_validated(self) -> None:
        """Should validate values that arrive through overrides."""
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(None, {"k_floor": 2.0})
        assert excinfo.value.key == "k_floor"

    def test_unknown_override(self) -> None:
        """Should reject override keys it does not know."""
        with pytest.raises(ConfigError, match="unknown override"):
            load_run_config(None, {"colour": "red"})
