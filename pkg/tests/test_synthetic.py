"""Tests for synthetic datasets."""

import numpy as np
import pytest

from src.data.ingest import infer_time_axis, load_stations, parse_csv, resample
from src.data.models import Granularity
from src.synthetic import (
    DELHI_STATIONS,
    generate_dataset,
    seasonal_level,
    sinusoid_matrix,
    sinusoid_series,
)


class TestSeasonalLevel:
    """Tests for seasonal_level."""

    def test_peak_and_trough(self):
        """Test the November maximum and the May minimum."""
        assert seasonal_level(11) == pytest.approx(192.0)
        assert seasonal_level(5) == pytest.approx(48.0)
        assert max(range(1, 13), key=seasonal_level) == 11


class TestGenerateDataset:
    """Tests for generate_dataset."""

    def test_shape(self):
        """Test one row per station, month and reading."""
        dataset = generate_dataset(seed=1, months=12, readings_per_month=2)
        assert len(dataset.observations) == 5 * 12 * 2
        assert list(dataset.observations.columns) == ["station_id", "timestamp", "value"]
        assert dataset.stations == DELHI_STATIONS

    def test_same_seed_same_data(self):
        """Test determinism."""
        first = generate_dataset(seed=9)
        second = generate_dataset(seed=9)
        assert first.observations.equals(second.observations)

    def test_missing_fraction(self):
        """Test that no value is missing at fraction zero and some are otherwise."""
        assert generate_dataset(seed=2, missing_fraction=0.0).observations["value"].notna().all()
        assert generate_dataset(seed=2, missing_fraction=0.3).observations["value"].isna().any()

    def test_values_positive(self):
        """Test that every present reading is positive."""
        values = generate_dataset(seed=4).observations["value"].dropna()
        assert (values > 0).all()

    def test_written_files_ingest(self, tmp_path):
        """Test that the written CSVs resample to a monthly matrix."""
        stations_path, observations_path = generate_dataset(seed=5, months=6).write(tmp_path)
        assert stations_path.read_text().splitlines()[1] == "S01,28.6469,77.3152"
        assert "NA" in observations_path.read_text()

        stations = load_stations(stations_path)
        records = parse_csv(observations_path)
        matrix = resample(records, stations, infer_time_axis(records, Granularity.ONE_MONTH))
        assert matrix.values.shape == (5, 6)
        assert matrix.observed.mean() > 0.5


class TestSinusoids:
    """Tests for sinusoid_series and sinusoid_matrix."""

    def test_series(self):
        """Test the noiseless curve."""
        series = sinusoid_series(n=12, period=12, mean=50.0, amplitude=20.0)
        assert series[0] == pytest.approx(50.0)
        assert series[3] == pytest.approx(70.0)
        assert series[9] == pytest.approx(30.0)

    def test_noise_is_seeded(self):
        """Test that noise depends only on the seed."""
        a = sinusoid_series(n=20, noise=2.0, seed=3)
        b = sinusoid_series(n=20, noise=2.0, seed=3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, sinusoid_series(n=20))

    def test_matrix_phase_shift(self):
        """Test that station i is the base series rolled by i."""
        complete, _ = sinusoid_matrix(DELHI_STATIONS, n=24)
        np.testing.assert_allclose(complete.values[2], np.roll(complete.values[0], 2))

    def test_masked_count(self):
        """Test that the masked copy hides the requested share of cells."""
        complete, masked = sinusoid_matrix(DELHI_STATIONS, n=20, missing_fraction=0.1, seed=1)
        assert complete.observed.all()
        assert int((~masked.observed).sum()) == 10
        np.testing.assert_array_equal(
            masked.values[masked.observed], complete.values[masked.observed]
        )
