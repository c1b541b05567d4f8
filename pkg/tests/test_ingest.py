"""Tests for observation ingestion and resampling."""

import io
from datetime import date, datetime

import numpy as np
import pytest

from src.data.ingest import (
    EmptyInput,
    InvalidRecord,
    MissingColumn,
    RawRecord,
    UnknownStation,
    infer_time_axis,
    load_stations,
    parse_csv,
    read_matrix_csv,
    resample,
    write_matrix_csv,
)
from src.data.models import Granularity, ObservationMatrix, Station, TimeAxis
from src.errors import DataError


OBSERVATIONS = b"""station_id,timestamp,value
S01,2019-01-05T10:00:00,10.0
S01,2019-01-15,20.0
S02,2019-01-05 10:00:00,NA
S02,2019-02-05T10:00:00,-3.0
S01,2019-02-10T10:00:00,30.5
S02,2019-03-01T00:00:00,7.25
"""


@pytest.fixture
def stations():
    """Two stations."""
    return [Station("S01", 28.6469, 77.3152), Station("S02", 28.6286, 77.2410)]


@pytest.fixture
def axis():
    """Monthly axis of three buckets."""
    return TimeAxis(date(2019, 1, 1), Granularity.ONE_MONTH, 3)


class TestParseCsv:
    """Tests for parse_csv."""

    def test_parses_rows(self):
        """Test that every row becomes a record; NA becomes None."""
        records = parse_csv(io.BytesIO(OBSERVATIONS))
        assert len(records) == 6
        assert records[0] == RawRecord("S01", datetime(2019, 1, 5, 10, 0), 10.0)
        assert records[2].value is None
        assert records[1].timestamp == datetime(2019, 1, 15)

    def test_custom_schema(self):
        """Test that configured header names are honored."""
        data = b"site,when,pm25\nS01,2019-01-01,5.5\n"
        records = parse_csv(
            io.BytesIO(data), {"station_id": "site", "timestamp": "when", "value": "pm25"}
        )
        assert records[0].value == 5.5

    def test_missing_column(self):
        """Test that an absent column raises MissingColumn."""
        with pytest.raises(MissingColumn, match="value"):
            parse_csv(io.BytesIO(b"station_id,timestamp\nS01,2019-01-01\n"))

    def test_header_only(self):
        """Test that a header without rows raises EmptyInput."""
        with pytest.raises(EmptyInput):
            parse_csv(io.BytesIO(b"station_id,timestamp,value\n"))

    def test_empty_stream(self):
        """Test that an empty stream raises EmptyInput."""
        with pytest.raises(EmptyInput):
            parse_csv(io.BytesIO(b""))

    def test_bad_timestamp(self):
        """Test that an unparseable timestamp names the row."""
        data = b"station_id,timestamp,value\nS01,2019-01-01,1\nS01,yesterday,2\n"
        with pytest.raises(InvalidRecord, match="row 2"):
            parse_csv(io.BytesIO(data))

    def test_empty_station_id(self):
        """Test that a blank station id is rejected."""
        data = b"station_id,timestamp,value\n,2019-01-01,1\n"
        with pytest.raises(InvalidRecord, match="Empty station id"):
            parse_csv(io.BytesIO(data))


class TestLoadStations:
    """Tests for load_stations."""

    def test_loads_bundled_file(self):
        """Test the bundled synthetic station list."""
        stations = load_stations("data/synthetic/stations.csv")
        assert [s.id for s in stations] == ["S01", "S02", "S03", "S04", "S05"]
        assert stations[4].lat == pytest.approx(28.8227)

    def test_duplicate_id(self):
        """Test that duplicate ids are rejected."""
        data = b"id,lat,lon\nA,1,1\nA,2,2\n"
        with pytest.raises(DataError, match="Duplicate station id"):
            load_stations(io.BytesIO(data))

    def test_bad_coordinates(self):
        """Test that out-of-range coordinates are rejected."""
        with pytest.raises(DataError, match="Invalid station row"):
            load_stations(io.BytesIO(b"id,lat,lon\nA,95,1\n"))

    def test_missing_columns(self):
        """Test that a stations file without lon is rejected."""
        with pytest.raises(MissingColumn):
            load_stations(io.BytesIO(b"id,lat\nA,1\n"))


class TestInferTimeAxis:
    """Tests for infer_time_axis."""

    def test_covers_all_records(self):
        """Test that the axis starts at the first month and covers the last record."""
        axis = infer_time_axis(parse_csv(io.BytesIO(OBSERVATIONS)), Granularity.ONE_MONTH)
        assert axis.start == date(2019, 1, 1)
        assert axis.count == 3

    def test_explicit_start(self):
        """Test that a configured start is kept."""
        records = parse_csv(io.BytesIO(OBSERVATIONS))
        axis = infer_time_axis(records, Granularity.CUSTOM, custom_days=30, start=date(2019, 1, 5))
        assert axis.start == date(2019, 1, 5)
        assert axis.bucket_index(date(2019, 3, 1)) < axis.count

    def test_no_records(self):
        """Test that zero records raise EmptyInput."""
        with pytest.raises(EmptyInput):
            infer_time_axis([], Granularity.ONE_MONTH)


class TestResample:
    """Tests for resample."""

    def test_bucket_means(self, stations, axis):
        """Test arithmetic means per bucket with missing and nonpositive cells."""
        matrix = resample(parse_csv(io.BytesIO(OBSERVATIONS)), stations, axis)
        assert matrix.values[0, 0] == pytest.approx(15.0)
        assert matrix.values[0, 1] == pytest.approx(30.5)
        assert np.isnan(matrix.values[0, 2])
        assert not matrix.observed[1, 0]
        assert not matrix.observed[1, 1]
        assert matrix.values[1, 2] == pytest.approx(7.25)

    def test_order_independent(self, stations, axis):
        """Test that shuffling records does not change the matrix."""
        records = parse_csv(io.BytesIO(OBSERVATIONS))
        forward = resample(records, stations, axis)
        backward = resample(list(reversed(records)), stations, axis)
        np.testing.assert_array_equal(forward.observed, backward.observed)
        np.testing.assert_array_equal(
            np.nan_to_num(forward.values), np.nan_to_num(backward.values)
        )

    def test_unknown_station(self, stations, axis):
        """Test that a record for an unlisted station is rejected."""
        records = [RawRecord("S99", datetime(2019, 1, 1), 1.0)]
        with pytest.raises(UnknownStation, match="S99"):
            resample(records, stations, axis)

    def test_records_outside_axis_skipped(self, stations, axis):
        """Test that records beyond the axis do not land in any bucket."""
        records = [
            RawRecord("S01", datetime(2019, 1, 2), 4.0),
            RawRecord("S01", datetime(2020, 1, 2), 99.0),
        ]
        matrix = resample(records, stations, axis)
        assert int(matrix.observed.sum()) == 1


class TestMatrixCsv:
    """Tests for the matrix export used between stages."""

    def test_write_then_read(self, stations, axis, tmp_path):
        """Test that the export reads back with the same cells."""
        matrix = resample(parse_csv(io.BytesIO(OBSERVATIONS)), stations, axis)
        path = tmp_path / "matrix.csv"
        write_matrix_csv(matrix, path)

        header = path.read_text().splitlines()[0]
        assert header == "station_id,2019-01-01,2019-02-01,2019-03-01"

        restored = read_matrix_csv(path, stations, Granularity.ONE_MONTH)
        np.testing.assert_array_equal(restored.observed, matrix.observed)
        np.testing.assert_array_equal(
            restored.values[matrix.observed], matrix.values[matrix.observed]
        )

    def test_missing_cells_empty(self, stations, axis, tmp_path):
        """Test shortest exact numerals with empty missing cells."""
        matrix = resample(parse_csv(io.BytesIO(OBSERVATIONS)), stations, axis)
        path = tmp_path / "matrix.csv"
        write_matrix_csv(matrix, path)
        assert path.read_text().splitlines()[1] == "S01,15,30.5,"

    def test_tiny_and_long_values_survive(self, stations, axis, tmp_path):
        """Test that values below the sixth decimal and with many digits read back exactly."""
        values = np.array([[3e-7, 1.0 / 3.0, 123456.7890123], [2.5e-9, 0.1, np.nan]])
        matrix = ObservationMatrix.from_values(stations, axis, values)
        path = tmp_path / "matrix.csv"
        write_matrix_csv(matrix, path)

        restored = read_matrix_csv(path, stations, Granularity.ONE_MONTH)
        np.testing.assert_array_equal(restored.observed, matrix.observed)
        np.testing.assert_array_equal(
            restored.values[matrix.observed], matrix.values[matrix.observed]
        )

    def test_unknown_station_on_read(self, stations, tmp_path):
        """Test that rows for unknown stations are rejected."""
        path = tmp_path / "matrix.csv"
        path.write_text("station_id,2019-01-01,2019-02-01\nS09,1.0,2.0\n")
        with pytest.raises(UnknownStation):
            read_matrix_csv(path, stations, Granularity.ONE_MONTH)
