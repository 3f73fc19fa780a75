"""Tests for outcomes, utility and the mechanism types."""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from leontief_mech.curves import ThresholdCurve
from leontief_mech.dist import TypePoint
from leontief_mech.errors import DomainError, InvalidCurveError, MechanismError, MonotonicityError
from leontief_mech.mech import (
    NULL_OUTCOME,
    GridMechanism,
    Mesh,
    Outcome,
    PostedPrice,
    RatioDependentPrice,
    RawGridMechanism,
    load_mechanism,
    make_ratio_dependent,
    mechanism_from_allocation,
    mechanism_from_dict,
    non_wasteful_reduction,
    payment_from_allocation,
    utility,
    utility_values,
)

V11 = np.linspace(0.0, 1.0, 11)
K3 = np.asarray([0.25, 0.5, 1.0])


class TestUtility:
    """Test Leontief utility."""

    def test_binding_coordinate(self) -> None:
        """Should value only the binding good: v min(a1/k, a2) - t."""
        assert utility(TypePoint(0.8, 0.5), Outcome(0.25, 1.0, 0.1)) == pytest.approx(0.3)
        assert utility(TypePoint(0.8, 0.5), Outcome(1.0, 0.25, 0.1)) == pytest.approx(0.1)

    def test_null_outcome(self) -> None:
        """Should give zero utility for the null outcome."""
        assert utility(TypePoint(0.9, 0.3), NULL_OUTCOME) == 0.0

    def test_vectorized_utility_broadcasts(self) -> None:
        """Should broadcast values against ratios."""
        u = utility_values(V11[None, :], K3[:, None], 0.25, 1.0, 0.0)
        assert u.shape == (3, 11)
        np.testing.assert_allclose(u[0], V11)

    def test_outcome_quantities_are_bounded(self) -> None:
        """Should reject quantities outside [0, 1]."""
        with pytest.raises(DomainError):
            Outcome(1.5, 0.0, 0.0)


class TestMesh:
    """Test type meshes."""

    def test_regular_mesh(self) -> None:
        """Should span [0, 1] in v and [k_floor, 1] in k."""
        mesh = Mesh.regular(5, 0.1, nk=4)
        assert mesh.shape == (4, 5)
        assert mesh.k[0] == 0.1
        assert mesh.same_as(Mesh.regular(5, 0.1, nk=4))

    @pytest.mark.parametrize(
        ("v", "k"),
        [([0.0], [1.0]), ([0.5, 0.2], [1.0]), ([0.0, 1.0], [0.0, 1.0]), ([0.0, 1.5], [1.0])],
    )
    def test_invalid_meshes(self, v: list[float], k: list[float]) -> None:
        """Should reject short, unsorted or out-of-domain meshes."""
        with pytest.raises(DomainError):
            Mesh(np.asarray(v), np.asarray(k))


class TestPriceMechanisms:
    """Test posted and ratio-dependent prices."""

    def test_posted_price_sells_above_price(self) -> None:
        """Should sell (k, 1) at the price strictly above it and nothing otherwise."""
        m = PostedPrice(0.5)
        assert m.outcome(TypePoint(0.7, 0.4)) == Outcome(0.4, 1.0, 0.5)
        assert m.outcome(TypePoint(0.5, 0.4)) == NULL_OUTCOME
        assert m.outcome(TypePoint(0.0, 1.0)) == NULL_OUTCOME

    def test_posted_price_range(self) -> None:
        """Should reject prices outside [0, 1]."""
        with pytest.raises(DomainError):
            PostedPrice(1.2)

    def test_valid_ratio_dependent_curve(self) -> None:
        """Should accept a nondecreasing psi with psi(k)/k nonincreasing."""
        k = np.linspace(0.1, 1.0, 10)
        m = make_ratio_dependent(ThresholdCurve(k, 0.3 + 0.2 * k, "psi"))
        assert m.price(np.asarray([0.1]))[0] == pytest.approx(0.32)
        assert not m.is_posted_price

    def test_constant_curve_is_posted_price(self) -> None:
        """Should recognize a flat psi as a posted price."""
        m = make_ratio_dependent(ThresholdCurve.constant(0.4, [0.5, 1.0], "psi"))
        assert m.is_posted_price

    def test_decreasing_curve_is_rejected(self) -> None:
        """Should name the pair where psi decreases."""
        with pytest.raises(InvalidCurveError, match="psi decreases") as excinfo:
            make_ratio_dependent(ThresholdCurve(np.asarray([0.5, 1.0]), np.asarray([0.5, 0.4])))
        assert excinfo.value.pair == (0.5, 1.0)

    def test_steep_curve_is_rejected(self) -> None:
        """Should reject psi(k') growing faster than k'/k."""
        with pytest.raises(InvalidCurveError, match="exceeds"):
            make_ratio_dependent(ThresholdCurve(np.asarray([0.5, 1.0]), np.asarray([0.1, 0.5])))

    def test_out_of_range_curve_is_rejected(self) -> None:
        """Should reject prices above 1."""
        with pytest.raises(InvalidCurveError, match="outside"):
            make_ratio_dependent(ThresholdCurve(np.asarray([0.5, 1.0]), np.asarray([0.5, 1.2])))

    def test_to_grid_is_exact_step_mechanism(self) -> None:
        """Should convert to step rows with payment equal to the price."""
        m = RatioDependentPrice(ThresholdCurve(K3, np.asarray([0.2, 0.3, 0.6])))
        grid = m.to_grid(Mesh(V11, K3))
        assert grid.is_step
        np.testing.assert_allclose(grid.cumulative[1], np.maximum(0.0, V11 - 0.3))
        np.testing.assert_allclose(grid.p[2], np.where(V11 > 0.6, 0.6, 0.0))


class TestGridMechanism:
    """Test non-wasteful grid mechanisms."""

    def test_from_thresholds(self) -> None:
        """Should store f1 = k f2 and p(0, 1) = p00."""
        m = GridMechanism.from_thresholds(V11, K3, [0.3, 0.3, 0.5], p00=-0.1)
        np.testing.assert_allclose(m.f1, K3[:, None] * m.f2)
        assert m.p00 == -0.1
        outcome = m.outcome(TypePoint(1.0, 0.5))
        assert (outcome.a1, outcome.a2) == (0.5, 1.0)
        assert outcome.t == pytest.approx(0.2)

    @pytest.mark.parametrize(
        ("f2", "match"),
        [(np.full((3, 11), 1.5), r"\[0, 1\]"), (np.zeros((2, 11)), "does not match"), (np.full((3, 11), np.nan), "finite")],
    )
    def test_invalid_grids(self, f2: np.ndarray, match: str) -> None:
        """Should reject out-of-range, misshapen or non-finite grids."""
        with pytest.raises(MechanismError, match=match):
            GridMechanism(V11, K3, f2, np.zeros((3, 11)))

    def test_inconsistent_step_rows(self) -> None:
        """Should reject step thresholds that disagree with f2."""
        with pytest.raises(MechanismError, match="Step rows"):
            GridMechanism(V11, K3, np.ones((3, 11)), np.zeros((3, 11)), np.asarray([0.5, 0.5, 0.5]))

    def test_large_payments_warn(self, caplog: pytest.LogCaptureFixture) -> None:
        """Should warn when stored payments exceed the value bound."""
        with caplog.at_level(logging.WARNING, logger="leontief_mech.mech"):
            GridMechanism(V11, K3, np.zeros((3, 11)), np.full((3, 11), 2.0))
        assert "exceed the value bound" in caplog.text

    def test_p00_needs_corner(self) -> None:
        """Should require v = 0 and k = 1 on the mesh for p(0, 1)."""
        m = GridMechanism(V11, np.asarray([0.25, 0.5]), np.zeros((2, 11)), np.zeros((2, 11)))
        with pytest.raises(MechanismError, match="p\\(0,1\\)"):
            _ = m.p00

    def test_only_defined_on_own_mesh(self) -> None:
        """Should refuse outcomes off its own mesh."""
        m = GridMechanism.from_thresholds(V11, K3, [0.5, 0.5, 0.5])
        with pytest.raises(MechanismError, match="own mesh"):
            m.outcome_grid(Mesh.regular(5))
        with pytest.raises(DomainError, match="not a mesh node"):
            m.outcome(TypePoint(0.55, 0.5))

    def test_cumulative_is_exact_between_nodes(self) -> None:
        """Should integrate piecewise-linear rows exactly between nodes."""
        m = mechanism_from_allocation(np.asarray([0.0, 1.0]), np.asarray([1.0]), np.asarray([[0.0, 1.0]]))
        assert float(m.cumulative_at(0, 0.5)) == pytest.approx(0.125)
        assert m.total_allocation()[0] == pytest.approx(0.5)

    def test_truthful_utility_matches_payment_identity(self) -> None:
        """Should give truthful utility equal to the cumulative allocation when p(0,1) = 0."""
        f2 = np.tile(V11, (3, 1))
        m = mechanism_from_allocation(V11, K3, f2)
        np.testing.assert_allclose(m.truthful_utility(m.mesh), m.cumulative, atol=1e-15)

    def test_grid_rows_follow_csv_schema(self) -> None:
        """Should list (v, k, f1, f2, p) with v varying fastest."""
        m = GridMechanism.from_thresholds(V11, K3, [0.5, 0.5, 0.5])
        rows = m.grid_rows()
        assert len(rows) == 33
        assert rows[10] == (1.0, 0.25, 0.25, 1.0, 0.5)


class TestPaymentIdentity:
    """Test payments built from allocations."""

    def test_linear_allocation(self) -> None:
        """Should give p = v^2 / 2 for f2 = v."""
        p = payment_from_allocation(V11, V11[None, :])
        np.testing.assert_allclose(p[0], V11**2 / 2.0, atol=1e-15)

    def test_step_allocation(self) -> None:
        """Should charge the threshold above it."""
        f2 = (V11 > 0.45).astype(float)[None, :]
        p = payment_from_allocation(V11, f2, thresholds=[0.45])
        np.testing.assert_allclose(p[0], np.where(V11 > 0.45, 0.45, 0.0), atol=1e-15)

    def test_offset(self) -> None:
        """Should shift every payment by p(0, 1)."""
        m = mechanism_from_allocation(V11, K3, np.zeros((3, 11)), p00=-0.2)
        np.testing.assert_allclose(m.p, -0.2)

    def test_decreasing_allocation_is_rejected(self) -> None:
        """Should refuse allocations that fall in v."""
        with pytest.raises(MonotonicityError, match="row 0"):
            payment_from_allocation(V11, (1.0 - V11)[None, :])


class TestNonWastefulReduction:
    """Test the reduction of wasteful mechanisms."""

    def test_keeps_binding_quantities_and_payments(self) -> None:
        """Should set f2 = min(f1/k, f2) and copy payments."""
        f1 = np.asarray([[0.0, 0.5, 0.5]])
        f2 = np.asarray([[0.0, 0.2, 1.0]])
        p = np.asarray([[0.0, 0.1, 0.3]])
        raw = RawGridMechanism(np.asarray([0.0, 0.5, 1.0]), np.asarray([0.5]), f1, f2, p)
        reduced = non_wasteful_reduction(raw)
        np.testing.assert_allclose(reduced.f2, [[0.0, 0.2, 1.0]])
        np.testing.assert_allclose(reduced.f1, [[0.0, 0.1, 0.5]])
        np.testing.assert_array_equal(reduced.p, p)
        np.testing.assert_array_equal(reduced.truthful_utility(reduced.mesh), raw.truthful_utility(raw.mesh))


class TestSerialization:
    """Test mechanism files."""

    def test_load_posted_price(self, tmp_path: Path) -> None:
        """Should load a posted price from JSON."""
        path = tmp_path / "m.json"
        path.write_text(json.dumps(PostedPrice(0.4).to_dict()))
        m = load_mechanism(path)
        assert isinstance(m, PostedPrice)
        assert m.rho_star == 0.4

    def test_ratio_dependent_is_not_revalidated(self) -> None:
        """Should load hand-edited invalid curves so the checkers can reject them."""
        m = mechanism_from_dict({"kind": "ratio_dependent", "psi": [[0.5, 0.6], [1.0, 0.2]]})
        assert isinstance(m, RatioDependentPrice)
        assert m.psi.values.tolist() == [0.6, 0.2]

    def test_grid_round_trip(self) -> None:
        """Should rebuild a step grid with its thresholds."""
        m = GridMechanism.from_thresholds(V11, K3, [0.3, 0.4, 0.5])
        rebuilt = mechanism_from_dict(json.loads(json.dumps(m.to_dict())))
        assert isinstance(rebuilt, GridMechanism)
        assert rebuilt.is_step
        np.testing.assert_array_equal(rebuilt.p, m.p)

    def test_missing_field(self) -> None:
        """Should name the missing field."""
        with pytest.raises(MechanismError, match="missing field"):
            mechanism_from_dict({"kind": "posted_price"})

    def test_unknown_kind(self) -> None:
        """Should reject unknown kinds."""
        with pytest.raises(MechanismError, match="Unknown mechanism kind"):
            mechanism_from_dict({"kind": "auction"})

    def test_bad_files(self, tmp_path: Path) -> None:
        """Should reject missing files, bad JSON and non-objects."""
        with pytest.raises(FileNotFoundError):
            load_mechanism(tmp_path / "absent.json")
        path = tmp_path / "m.json"
        path.write_text("{oops")
        with pytest.raises(MechanismError, match="Invalid mechanism JSON"):
            load_mechanism(path)
        path.write_text("[]")
        with pytest.raises(MechanismError, match="must be an object"):
            load_mechanism(path)
