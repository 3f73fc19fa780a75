"""Pytest configuration: environment isolation and shared distributions."""

from pathlib import Path

import numpy as np
import pytest
from dotenv import load_dotenv

from leontief_mech.config import CONFIG_ENV_VAR, NumericConfig
from leontief_mech.dist import LinearRatioDistribution, PowerRatioDistribution, UniformDistribution

# Load .env file at module import time (before pytest collection)
env_path = Path(__file__).parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path, override=True)


@pytest.fixture(autouse=True)
def isolate_config_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep a developer's LMECH_CONFIG (from the shell or .env) out of the tests.

    Tests that exercise the environment variable set it themselves.
    """
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


@pytest.fixture(scope="session")
def fast_numerics() -> NumericConfig:
    """Coarser quadrature for checks whose accuracy does not depend on it."""
    return NumericConfig(quad_nodes_1d=201, condition_k_nodes=21, condition_v_nodes=401, price_scan_nodes=400)


@pytest.fixture(scope="session")
def uniform() -> UniformDistribution:
    return UniformDistribution()


@pytest.fixture(scope="session")
def example1() -> PowerRatioDistribution:
    return PowerRatioDistribution()


@pytest.fixture(scope="session")
def example2() -> LinearRatioDistribution:
    return LinearRatioDistribution()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
