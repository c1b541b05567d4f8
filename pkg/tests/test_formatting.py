"""Tests for formatting utilities."""

import math

import pytest

from src.utils.formatting import (
    EXPORT_DECIMALS,
    format_distance,
    format_duration,
    format_fixed,
    format_params,
    round6,
)


class TestRound6:
    """Tests for round6 function."""

    def test_rounds_to_export_precision(self):
        """Test rounding to six decimals."""
        assert round6(1.23456789) == 1.234568
        assert EXPORT_DECIMALS == 6

    def test_accepts_numpy_like(self):
        """Test that integer input becomes a float."""
        assert isinstance(round6(3), float)


class TestFormatFixed:
    """Tests for format_fixed function."""

    @pytest.mark.parametrize(
        "value,decimals,expected",
        [
            (0.4871, 6, "0.487100"),
            (1.487335, 6, "1.487335"),
            (-29.816723, 2, "-29.82"),
            (18026, 0, "18026"),
        ],
    )
    def test_fixed_decimals(self, value, decimals, expected):
        """Test fixed-point output."""
        assert format_fixed(value, decimals=decimals) == expected

    def test_nan_and_none(self):
        """Test that missing values print as nan."""
        assert format_fixed(math.nan) == "nan"
        assert format_fixed(None) == "nan"

    def test_no_negative_zero(self):
        """Test that tiny negatives do not print as -0."""
        assert format_fixed(-1e-9) == "0.000000"


class TestFormatParams:
    """Tests for format_params function."""

    def test_named_pairs(self):
        """Test name=value pairs joined by semicolons."""
        assert format_params(["shape", "scale"], [4.8763, 1.829]) == (
            "shape=4.876300; scale=1.829000"
        )

    def test_empty(self):
        """Test that no parameters give an empty string."""
        assert format_params([], []) == ""


class TestFormatDistance:
    """Tests for format_distance function."""

    def test_kilometres(self):
        """Test meters rendered as kilometres."""
        assert format_distance(18026.0) == "18.026 km"

    def test_infinite(self):
        """Test the unbounded radius."""
        assert format_distance(math.inf) == "inf km"


class TestFormatDuration:
    """Tests for format_duration function."""

    def test_seconds(self):
        """Test seconds with three decimals."""
        assert format_duration(1.23456) == "1.235 s"
