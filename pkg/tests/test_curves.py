"""Tests for threshold curves."""

from pathlib import Path

import numpy as np
import pytest

from leontief_mech.curves import ThresholdCurve


class TestThresholdCurve:
    """Test construction and evaluation."""

    def test_interpolates_and_holds_ends(self) -> None:
        """Should interpolate linearly inside the grid and hold the end values outside."""
        curve = ThresholdCurve(np.asarray([0.5, 1.0]), np.asarray([0.2, 0.4]))
        np.testing.assert_allclose(curve([0.1, 0.75, 1.0]), [0.2, 0.3, 0.4])

    @pytest.mark.parametrize(
        ("k", "values", "match"),
        [
            ([0.1, 0.2], [0.3], "equal length"),
            ([], [], "at least one"),
            ([0.5, 0.5], [0.1, 0.2], "ascending"),
            ([0.1, 0.2], [0.1, np.nan], "finite"),
        ],
    )
    def test_rejects_bad_tables(self, k: list[float], values: list[float], match: str) -> None:
        """Should reject malformed grids and values."""
        with pytest.raises(ValueError, match=match):
            ThresholdCurve(np.asarray(k, dtype=float), np.asarray(values, dtype=float))

    def test_from_function_samples_grid(self) -> None:
        """Should sample a vectorized function, broadcasting scalars."""
        grid = np.linspace(0.1, 1.0, 4)
        assert ThresholdCurve.from_function(lambda k: 2 * k, grid).values == pytest.approx(2 * grid)
        assert ThresholdCurve.from_function(lambda _k: 0.3, grid).is_constant()

    def test_constant_curve(self) -> None:
        """Should build a flat curve and report it as constant."""
        curve = ThresholdCurve.constant(0.5, [0.1, 0.5, 1.0])
        assert curve.is_constant()
        assert len(curve) == 3

    def test_rows_round_trip(self) -> None:
        """Should rebuild the same curve from its [k, value] rows."""
        curve = ThresholdCurve(np.asarray([0.25, 1.0]), np.asarray([0.3, 0.6]), "psi")
        rebuilt = ThresholdCurve.from_rows(curve.to_rows(), "psi")
        np.testing.assert_array_equal(rebuilt.k, curve.k)
        np.testing.assert_array_equal(rebuilt.values, curve.values)

    def test_from_rows_rejects_bad_tables(self) -> None:
        """Should reject empty tables and rows that are not pairs."""
        with pytest.raises(ValueError, match="empty"):
            ThresholdCurve.from_rows([])
        with pytest.raises(ValueError, match="pairs"):
            ThresholdCurve.from_rows([[0.1, 0.2, 0.3]])

    def test_to_csv_writes_named_column(self, tmp_path: Path) -> None:
        """Should write a k column and a column named after the curve."""
        curve = ThresholdCurve(np.asarray([0.5, 1.0]), np.asarray([0.25, 0.5]), "psi")
        path = curve.to_csv(tmp_path / "psi.csv")
        assert path.read_text().splitlines() == ["k,psi", "0.5,0.25", "1.0,0.5"]
