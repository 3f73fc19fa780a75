"""Tests for the type distributions and their validation."""

from pathlib import Path

import numpy as np
import pytest

from leontief_mech.config import NumericConfig
from leontief_mech.dist import (
    Distribution,
    IndependentProductDistribution,
    LinearRatioDistribution,
    Marginal,
    PowerRatioDistribution,
    TabulatedDistribution,
    TypePoint,
    UniformDistribution,
    build_distribution,
    conditional_cdf,
    density,
    marginals,
    validate,
)
from leontief_mech.errors import DistributionError, DomainError


def write_table(path: Path, v_nodes: list[float], k_nodes: list[float], value: float = 1.0) -> Path:
    lines = ["v,k,density"]
    lines += [f"{v},{k},{value}" for k in k_nodes for v in v_nodes]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestTypePoint:
    """Test the type domain."""

    @pytest.mark.parametrize(("v", "k"), [(-0.1, 0.5), (1.1, 0.5), (0.5, 0.0), (0.5, 1.5)])
    def test_out_of_domain(self, v: float, k: float) -> None:
        """Should reject values outside [0, 1] and ratios outside (0, 1]."""
        with pytest.raises(DomainError):
            TypePoint(v, k)

    def test_corner_types_are_allowed(self) -> None:
        """Should accept v = 0 and k = 1."""
        assert TypePoint(0.0, 1.0).k == 1.0


class TestBuiltinFamilies:
    """Test the closed forms of the built-in families."""

    def test_uniform(self, uniform: UniformDistribution) -> None:
        """Should have unit density and G(v|k) = v."""
        assert density(uniform, TypePoint(0.3, 0.7)) == 1.0
        assert conditional_cdf(uniform, 0.3, 0.7) == pytest.approx(0.3)
        assert marginals(uniform).cdf_v(0.4) == pytest.approx(0.4)

    def test_power_ratio_conditionals(self, example1: PowerRatioDistribution) -> None:
        """Should have G(v|k) = v^(k+1) and g(v|k) = (k+1) v^k."""
        assert conditional_cdf(example1, 0.5, 0.5) == pytest.approx(0.5**1.5)
        assert float(example1.conditional_density(0.5, 0.5)) == pytest.approx(1.5 * 0.5**0.5)

    def test_power_ratio_marginal_integrates_to_one(self, example1: PowerRatioDistribution) -> None:
        """Should have a ratio marginal of unit mass."""
        assert float(example1.integrate_k(example1.marginal_k)) == pytest.approx(1.0, abs=1e-10)

    def test_linear_ratio_closed_marginal_matches_generic_route(self, example2: LinearRatioDistribution) -> None:
        """Should agree with the generic k-integral of g_k G(p|k)."""
        points = np.asarray([0.1, 0.5, 0.9])
        generic = Distribution.marginal_v_cdf(example2, points)
        np.testing.assert_allclose(example2.marginal_v_cdf(points), generic, atol=1e-10)
        generic_density = Distribution.marginal_v_density(example2, points)
        np.testing.assert_allclose(example2.marginal_v_density(points), generic_density, atol=1e-10)

    def test_checked_accessors_enforce_domain(self, example2: LinearRatioDistribution) -> None:
        """Should reject values outside [0, 1] and ratios below k_floor."""
        with pytest.raises(DomainError, match="Value outside"):
            example2.density(1.5, 0.5)
        with pytest.raises(DomainError, match="Ratio outside"):
            example2.conditional_cdf(0.5, 1e-4)

    def test_k_floor_follows_config(self) -> None:
        """Should take the smallest supported ratio from the numeric config."""
        d = UniformDistribution(NumericConfig(k_floor=0.05))
        assert d.k_floor == 0.05
        with pytest.raises(DomainError):
            d.density(0.5, 0.01)


class TestValidate:
    """Test distribution validation."""

    @pytest.mark.parametrize("cls", [UniformDistribution, PowerRatioDistribution, LinearRatioDistribution])
    def test_builtin_families_pass(self, cls: type[Distribution], fast_numerics: NumericConfig) -> None:
        """Should pass every check for the built-in families."""
        report = validate(cls(fast_numerics))
        assert report.passed, report.to_dict()
        assert report.positivity_failure_count == 0

    def test_independent_product_passes(self, fast_numerics: NumericConfig) -> None:
        """Should pass for a truncated normal value marginal."""
        d = build_distribution(
            {"family": "IndependentProduct", "v": {"family": "truncnorm", "loc": 0.5, "scale": 0.2}, "k": "uniform"},
            fast_numerics,
        )
        assert validate(d).passed

    def test_zero_density_is_reported(self, fast_numerics: NumericConfig) -> None:
        """Should report a vanishing density as a positivity failure, not raise."""
        table = np.ones((2, 3))
        table[1, 1] = 0.0
        d = TabulatedDistribution([0.0, 0.5, 1.0], [0.1, 1.0], table, fast_numerics)
        report = validate(d)
        assert not report.passed
        assert report.positivity_failure_count == 1
        assert report.positivity_failures[0][:2] == (0.5, 1.0)
        assert report.to_dict()["passed"] is False


class TestMarginal:
    """Test scipy-backed marginals."""

    def test_beta_needs_bounded_density(self) -> None:
        """Should reject beta parameters below one."""
        with pytest.raises(DistributionError, match="a, b >= 1"):
            Marginal("beta", {"a": 0.5, "b": 2.0})

    def test_unknown_marginal(self) -> None:
        """Should reject an unknown marginal family."""
        with pytest.raises(DistributionError, match="Unknown marginal"):
            Marginal("cauchy")

    def test_truncnorm_is_normalized_on_unit_interval(self) -> None:
        """Should put all its mass on [0, 1]."""
        marginal = Marginal.from_dict({"family": "truncnorm", "loc": 0.3, "scale": 0.4})
        assert float(marginal.cdf(1.0)) == pytest.approx(1.0)
        assert float(marginal.cdf(0.0)) == pytest.approx(0.0)

    def test_independent_conditionals_ignore_ratio(self) -> None:
        """Should give the same conditional cdf at every ratio."""
        d = IndependentProductDistribution(Marginal("beta", {"a": 2.0, "b": 3.0}), Marginal("uniform"))
        assert float(d.cond_cdf(0.4, 0.1)) == pytest.approx(float(d.cond_cdf(0.4, 0.9)))


class TestTabulated:
    """Test densities tabulated on a mesh."""

    def test_renormalizes_and_gives_exact_conditionals(self) -> None:
        """Should rescale a constant table to unit mass with G(v|k) = v."""
        d = TabulatedDistribution([0.0, 0.5, 1.0], [0.1, 1.0], np.full((2, 3), 2.0))
        assert float(d.integrate_k(d.marginal_k)) == pytest.approx(1.0)
        np.testing.assert_allclose(d.cond_cdf(np.asarray([0.25, 0.75]), 0.4), [0.25, 0.75])
        assert d.k_floor == 0.1

    @pytest.mark.parametrize(
        ("v_nodes", "k_nodes", "match"),
        [
            ([0.0, 1.0], [0.5], "at least two"),
            ([0.1, 1.0], [0.5, 1.0], "span"),
            ([0.0, 1.0], [0.0, 1.0], "k0 > 0"),
            ([0.0, 0.6, 0.4, 1.0], [0.5, 1.0], "ascending"),
        ],
    )
    def test_rejects_bad_meshes(self, v_nodes: list[float], k_nodes: list[float], match: str) -> None:
        """Should reject meshes that do not cover the type space."""
        with pytest.raises(DistributionError, match=match):
            TabulatedDistribution(v_nodes, k_nodes, np.ones((len(k_nodes), len(v_nodes))))

    def test_from_csv(self, tmp_path: Path) -> None:
        """Should load a rectangular v,k,density table."""
        path = write_table(tmp_path / "g.csv", [0.0, 0.25, 1.0], [0.2, 1.0], value=3.0)
        d = TabulatedDistribution.from_csv(path)
        assert d.values.shape == (2, 3)
        assert d.to_dict() == {"family": "TabulatedGrid", "path": str(path)}
        assert d.mesh_notes() == ["v mesh is unevenly spaced (steps 0.25..0.75)"]

    def test_from_csv_rejects_bad_header(self, tmp_path: Path) -> None:
        """Should require the v,k,density header."""
        path = tmp_path / "g.csv"
        path.write_text("value,ratio,g\n0,1,1\n")
        with pytest.raises(DistributionError, match="header"):
            TabulatedDistribution.from_csv(path)

    def test_from_csv_rejects_ragged_mesh(self, tmp_path: Path) -> None:
        """Should reject a table with missing cells."""
        path = write_table(tmp_path / "g.csv", [0.0, 1.0], [0.5, 1.0])
        path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(DistributionError, match="not rectangular"):
            TabulatedDistribution.from_csv(path)

    def test_from_csv_missing_file(self, tmp_path: Path) -> None:
        """Should raise FileNotFoundError for a missing table."""
        with pytest.raises(FileNotFoundError):
            TabulatedDistribution.from_csv(tmp_path / "absent.csv")


class TestBuildDistribution:
    """Test building distributions from config specs."""

    @pytest.mark.parametrize(
        ("family", "cls"),
        [("Uniform", UniformDistribution), ("Example1", PowerRatioDistribution), ("Example2", LinearRatioDistribution)],
    )
    def test_builtin_families(self, family: str, cls: type[Distribution]) -> None:
        """Should map family names to the built-in classes."""
        assert isinstance(build_distribution({"family": family}), cls)

    def test_tabulated_path_is_relative_to_config(self, tmp_path: Path) -> None:
        """Should resolve a relative table path against the config directory."""
        write_table(tmp_path / "g.csv", [0.0, 1.0], [0.5, 1.0])
        d = build_distribution({"family": "TabulatedGrid", "path": "g.csv"}, base_dir=tmp_path)
        assert isinstance(d, TabulatedDistribution)

    def test_tabulated_needs_path(self) -> None:
        """Should require a path for tabulated densities."""
        with pytest.raises(DistributionError, match="path"):
            build_distribution({"family": "TabulatedGrid"})

    def test_unknown_family(self) -> None:
        """Should reject unknown families."""
        with pytest.raises(DistributionError, match="Unknown distribution family"):
            build_distribution({"family": "Pareto"})
