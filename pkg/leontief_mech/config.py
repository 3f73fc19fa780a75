"""Run configuration: numeric tolerances and the CLI run record."""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from leontief_mech.errors import ConfigError

CONFIG_ENV_VAR = "LMECH_CONFIG"
DEFAULT_OUT_DIR = "lmech-out"
MIN_RESOLUTION = 3
MAX_K_FLOOR = 0.5
DISTRIBUTION_FAMILIES = ("Uniform", "Example1", "Example2", "IndependentProduct", "TabulatedGrid")

_RESOLUTION_KEYS = (
    "quad_nodes_1d",
    "quad_nodes_2d",
    "condition_k_nodes",
    "condition_v_nodes",
    "price_scan_nodes",
)
_TOLERANCE_KEYS = (
    "root_tol",
    "sign_scan_step",
    "strict_eps",
    "curve_tol",
    "ic_tol",
    "price_tol",
    "near_optimal_tol",
    "revenue_tol",
    "normalization_tol",
    "marginal_tol",
)


@dataclass(frozen=True)
class NumericConfig:
    """All tolerances and resolutions used by the numerical routines."""

    k_floor: float = 1e-3
    quad_nodes_1d: int = 1001
    quad_nodes_2d: int = 201
    root_tol: float = 1e-10
    sign_scan_step: float = 1e-3
    strict_eps: float = 1e-9
    curve_tol: float = 1e-12
    ic_tol: float = 1e-9
    condition_k_nodes: int = 101
    condition_v_nodes: int = 1001
    price_scan_nodes: int = 1000
    price_tol: float = 1e-10
    near_optimal_tol: float = 1e-8
    revenue_tol: float = 1e-4
    normalization_tol: float = 1e-8
    marginal_tol: float = 1e-6
    oracle_max_k_nodes: int = 6
    oracle_max_rho_nodes: int = 40
    max_witnesses: int = 20
    workers: int = 1

    def validate(self) -> "NumericConfig":
        """Check ranges; raise ConfigError naming the first bad key."""
        if not 0.0 < self.k_floor <= MAX_K_FLOOR:
            raise ConfigError("k_floor", f"must lie in (0, {MAX_K_FLOOR}], got {self.k_floor}")
        for key in _RESOLUTION_KEYS:
            value = getattr(self, key)
            if value < MIN_RESOLUTION:
                raise ConfigError(key, f"resolution must be >= {MIN_RESOLUTION}, got {value}")
        for key in _TOLERANCE_KEYS:
            value = getattr(self, key)
            if not value > 0.0:
                raise ConfigError(key, f"tolerance must be > 0, got {value}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        return self


DEFAULT_NUMERICS = NumericConfig()


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs, captured in one record."""

    distribution: dict[str, Any] = field(default_factory=lambda: {"family": "Uniform"})
    numerics: NumericConfig = DEFAULT_NUMERICS
    verify_grid: int = 50
    out_dir: str = DEFAULT_OUT_DIR
    seed: int = 0
    oracle_k_nodes: int = 5
    oracle_rho_nodes: int = 31
    random_count: int = 200

    def validate(self) -> "RunConfig":
        """Check ranges of the run-level settings and the nested numerics."""
        self.numerics.validate()
        family = self.distribution.get("family")
        if family is None:
            raise ConfigError("distribution.family", "missing distribution family")
        if family not in DISTRIBUTION_FAMILIES:
            expected = ", ".join(DISTRIBUTION_FAMILIES)
            raise ConfigError("distribution.family", f"unknown family {family!r}; expected one of {expected}")
        for key in ("verify_grid", "oracle_k_nodes", "oracle_rho_nodes"):
            value = getattr(self, key)
            if value < MIN_RESOLUTION:
                raise ConfigError(key, f"resolution must be >= {MIN_RESOLUTION}, got {value}")
        if self.random_count < 1:
            raise ConfigError("random_count", f"must be >= 1, got {self.random_count}")
        return self

    def to_dict(self) -> dict[str, Any]:
        """Serialize to the JSON schema accepted by ``load_run_config``."""
        return asdict(self)


def _numerics_from_dict(raw: dict[str, Any]) -> NumericConfig:
    known = {f.name: f for f in fields(NumericConfig)}
    values: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"numerics.{key}", "unknown setting")
        expected = int if known[key].type in (int, "int") else float
        try:
            values[key] = expected(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"numerics.{key}", f"expected {expected.__name__}, got {value!r}") from e
    return NumericConfig(**values)


def run_config_from_dict(raw: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from a parsed JSON object, rejecting unknown keys."""
    known = {f.name for f in fields(RunConfig)}
    values: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(key, "unknown setting")
        if key == "numerics":
            if not isinstance(value, dict):
                raise ConfigError(key, "expected an object")
            values[key] = _numerics_from_dict(value)
        elif key == "distribution":
            if not isinstance(value, dict):
                raise ConfigError(key, "expected an object")
            values[key] = dict(value)
        elif key == "out_dir":
            values[key] = str(value)
        else:
            try:
                values[key] = int(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(key, f"expected an integer, got {value!r}") from e
    return RunConfig(**values)


def resolve_config_path(config_arg: str | None) -> Path | None:
    """Get the config path from the argument or the LMECH_CONFIG environment variable."""
    path = config_arg or os.environ.get(CONFIG_ENV_VAR)
    return Path(path) if path else None


def load_run_config(config_path: Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load a JSON config file (if any), apply flag overrides and validate.

    Recognized override keys: ``out_dir``, ``verify_grid``, ``seed``, ``k_floor``,
    ``tol`` (sets ``ic_tol``), ``family``, ``oracle_k_nodes``, ``oracle_rho_nodes``,
    ``random_count``.
    """
    raw: dict[str, Any] = {}
    if config_path is not None:
        if not config_path.exists():
            raise ConfigError("config", f"file not found: {config_path}")
        try:
            raw = json.loads(config_path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON in {config_path}: {e.msg}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config", "top-level JSON value must be an object")

    config = run_config_from_dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "k_floor":
            config = replace(config, numerics=replace(config.numerics, k_floor=float(value)))
        elif key == "tol":
            config = replace(config, numerics=replace(config.numerics, ic_tol=float(value)))
        elif key == "family":
            config = replace(config, distribution={"family": str(value)})
        elif key in ("out_dir", "verify_grid", "seed", "oracle_k_nodes", "oracle_rho_nodes", "random_count"):
            config = replace(config, **{key: value})
        else:
            raise ConfigError(key, "unknown override")
    return config.validate()
