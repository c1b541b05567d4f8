"""Tests for the shared domain types."""

from datetime import date

import numpy as np
import pytest

from src.data.models import (
    ClusterAssignment,
    Granularity,
    ObservationMatrix,
    Station,
    TimeAxis,
    parse_granularity,
    validate,
)


@pytest.fixture
def stations():
    """Three stations."""
    return [Station("A", 28.60, 77.20), Station("B", 28.62, 77.25), Station("C", 28.70, 77.10)]


@pytest.fixture
def axis():
    """Monthly axis of 4 buckets from January 2019."""
    return TimeAxis(start=date(2019, 1, 1), granularity=Granularity.ONE_MONTH, count=4)


class TestParseGranularity:
    """Tests for parse_granularity."""

    @pytest.mark.parametrize(
        "token,expected",
        [
            ("1m", (Granularity.ONE_MONTH, None)),
            ("2M", (Granularity.TWO_MONTHS, None)),
            (" 3m ", (Granularity.THREE_MONTHS, None)),
            ("10d", (Granularity.CUSTOM, 10)),
        ],
    )
    def test_tokens(self, token, expected):
        """Test accepted tokens."""
        assert parse_granularity(token) == expected

    def test_unknown(self):
        """Test that an unknown token raises error."""
        with pytest.raises(ValueError, match="Unknown granularity"):
            parse_granularity("weekly")

    def test_months(self):
        """Test bucket lengths in months."""
        assert Granularity.THREE_MONTHS.months == 3
        assert Granularity.CUSTOM.months is None


class TestStation:
    """Tests for Station."""

    def test_latitude_range(self):
        """Test that latitudes outside [-90, 90] are rejected."""
        with pytest.raises(ValueError, match="Latitude out of range"):
            Station("X", 91.0, 0.0)

    def test_longitude_range(self):
        """Test that longitudes outside [-180, 180] are rejected."""
        with pytest.raises(ValueError, match="Longitude out of range"):
            Station("X", 0.0, -180.5)

    def test_empty_id(self):
        """Test that an empty id is rejected."""
        with pytest.raises(ValueError, match="id is required"):
            Station("", 0.0, 0.0)


class TestTimeAxis:
    """Tests for TimeAxis."""

    def test_monthly_bucket_index(self, axis):
        """Test monthly bucketing."""
        assert axis.bucket_index(date(2019, 1, 31)) == 0
        assert axis.bucket_index(date(2019, 3, 15)) == 2
        assert axis.bucket_index(date(2018, 12, 31)) == -1

    def test_quarterly_bucket_index(self):
        """Test three-month bucketing across a year boundary."""
        axis = TimeAxis(date(2019, 1, 1), Granularity.THREE_MONTHS, 8)
        assert axis.bucket_index(date(2019, 3, 31)) == 0
        assert axis.bucket_index(date(2019, 4, 1)) == 1
        assert axis.bucket_index(date(2020, 1, 10)) == 4

    def test_custom_days(self):
        """Test day-length buckets."""
        axis = TimeAxis(date(2019, 1, 1), Granularity.CUSTOM, 10, custom_days=7)
        assert axis.bucket_index(date(2019, 1, 8)) == 1
        assert axis.bucket_start(2) == date(2019, 1, 15)

    def test_bucket_start_rolls_year(self):
        """Test that bucket starts cross into the next year."""
        axis = TimeAxis(date(2019, 11, 1), Granularity.TWO_MONTHS, 3)
        assert axis.labels() == ["2019-11-01", "2020-01-01", "2020-03-01"]

    def test_too_few_buckets(self):
        """Test that fewer than two buckets are rejected."""
        with pytest.raises(ValueError, match="at least 2 buckets"):
            TimeAxis(date(2019, 1, 1), Granularity.ONE_MONTH, 1)

    def test_custom_needs_days(self):
        """Test that custom granularity requires a day count."""
        with pytest.raises(ValueError, match="positive day count"):
            TimeAxis(date(2019, 1, 1), Granularity.CUSTOM, 3)

    @pytest.mark.parametrize("day", [29, 30, 31])
    def test_monthly_start_past_day_28(self, day):
        """Test that a monthly axis cannot start on a day some months lack."""
        with pytest.raises(ValueError, match="day 1-28"):
            TimeAxis(date(2019, 1, day), Granularity.ONE_MONTH, 4)

    def test_monthly_start_mid_month(self):
        """Test that bucket starts keep the start day through February."""
        axis = TimeAxis(date(2019, 1, 28), Granularity.ONE_MONTH, 3)
        assert axis.labels() == ["2019-01-28", "2019-02-28", "2019-03-28"]
        assert axis.bucket_index(date(2019, 2, 27)) == 0
        assert axis.bucket_index(date(2019, 2, 28)) == 1

    def test_custom_start_any_day(self):
        """Test that day buckets may start on the 31st."""
        axis = TimeAxis(date(2019, 1, 31), Granularity.CUSTOM, 3, custom_days=10)
        assert axis.bucket_start(1) == date(2019, 2, 10)


class TestObservationMatrix:
    """Tests for ObservationMatrix."""

    def test_from_values_derives_mask(self, stations, axis):
        """Test that NaN cells become missing."""
        values = np.array([[1.0, np.nan, 3.0, 4.0]] * 3)
        matrix = ObservationMatrix.from_values(stations, axis, values)
        assert matrix.observed.tolist()[0] == [True, False, True, True]
        assert not matrix.fully_observed

    def test_payloads_are_read_only(self, stations, axis):
        """Test that the arrays cannot be mutated."""
        matrix = ObservationMatrix.from_values(stations, axis, np.ones((3, 4)))
        with pytest.raises(ValueError):
            matrix.values[0, 0] = 2.0

    def test_station_index(self, stations, axis):
        """Test lookup by id."""
        matrix = ObservationMatrix.from_values(stations, axis, np.ones((3, 4)))
        assert matrix.station_index("C") == 2
        with pytest.raises(KeyError):
            matrix.station_index("Z")

    def test_without_station(self, stations, axis):
        """Test removing one row."""
        values = np.arange(1.0, 13.0).reshape(3, 4)
        reduced = ObservationMatrix.from_values(stations, axis, values).without_station(1)
        assert reduced.station_ids == ["A", "C"]
        assert reduced.values[1, 0] == 9.0


class TestValidate:
    """Tests for validate."""

    def test_valid_matrix(self, stations, axis):
        """Test that a well-formed matrix has no violations."""
        values = np.array([[1.0, np.nan, 3.0, 4.0]] * 3)
        assert validate(ObservationMatrix.from_values(stations, axis, values)) == []

    def test_nonpositive_observed_cell(self, stations, axis):
        """Test that an observed zero is reported with its cell."""
        values = np.ones((3, 4))
        values[1, 2] = 0.0
        violations = validate(ObservationMatrix.from_values(stations, axis, values))
        assert len(violations) == 1
        assert "(B, 2)" in violations[0]

    def test_missing_cell_holding_value(self, stations, axis):
        """Test that a masked cell with a value is reported."""
        observed = np.ones((3, 4), dtype=bool)
        observed[0, 0] = False
        matrix = ObservationMatrix(tuple(stations), axis, np.ones((3, 4)), observed)
        assert any("missing but holds a value" in v for v in validate(matrix))

    def test_duplicate_ids(self, axis):
        """Test that duplicate station ids are reported."""
        twins = [Station("A", 0.0, 0.0), Station("A", 1.0, 1.0)]
        matrix = ObservationMatrix.from_values(twins, axis, np.ones((2, 4)))
        assert validate(matrix) == ["duplicate station id 'A'"]

    def test_shape_mismatch(self, stations, axis):
        """Test that a wrongly shaped payload is reported."""
        matrix = ObservationMatrix(tuple(stations), axis, np.ones((3, 3)), np.ones((3, 3)))
        assert any("values shape" in v for v in validate(matrix))


class TestClusterAssignment:
    """Tests for ClusterAssignment."""

    def test_members(self):
        """Test members in station order."""
        assignment = ClusterAssignment(labels=(0, 1, 0, 1), radius_m=1000.0, representatives=(0, 3))
        assert assignment.n_clusters == 2
        assert assignment.members(1) == [1, 3]
