"""Tests for influence ratios and lag dependence."""

from datetime import date

import numpy as np
import pandas as pd
import pytest

from src.data.models import ClusterAssignment, Granularity, ObservationMatrix, Station, TimeAxis
from src.errors import DataError
from src.spatial.cluster import haversine
from src.stats.lagdep import (
    DEFAULT_WIDTH_FLOOR,
    DegenerateCluster,
    LagDependence,
    LagRatioSample,
    ecdf,
    freedman_diaconis_width,
    lag_dependence,
    resolve_bin_width,
    sir_samples,
    station_lag_dependences,
    tir_samples,
    write_lag_dependence_csv,
)


STATIONS = [Station("A", 28.60, 77.20), Station("B", 28.69, 77.20), Station("C", 28.60, 77.30)]


def _matrix(values, stations=None):
    values = np.asarray(values, dtype=float)
    stations = stations or STATIONS[: values.shape[0]]
    axis = TimeAxis(date(2019, 1, 1), Granularity.ONE_MONTH, values.shape[1])
    return ObservationMatrix.from_values(stations, axis, values)


def _one_cluster(n):
    return ClusterAssignment(labels=(0,) * n, radius_m=1e6, representatives=(0,))


class TestLagRatioSample:
    """Tests for LagRatioSample."""

    @pytest.mark.parametrize("ratio", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_ratio(self, ratio):
        """Test that ratios must be positive and finite."""
        with pytest.raises(ValueError, match="Ratio must be positive"):
            LagRatioSample(ratio, 1.0)

    def test_rejects_negative_lag(self):
        """Test that lags must be nonnegative."""
        with pytest.raises(ValueError, match="Lag must be nonnegative"):
            LagRatioSample(1.0, -0.5)


class TestSirSamples:
    """Tests for sir_samples."""

    def test_single_pair(self):
        """Test direct division with the pair distance as lag."""
        samples = sir_samples(_matrix([[100.0, 60.0], [50.0, 60.0]]), _one_cluster(2), 0)
        expected_lag = haversine(STATIONS[0], STATIONS[1])
        assert [s.ratio for s in samples] == [2.0, 1.0]
        assert all(s.lag == pytest.approx(expected_lag) for s in samples)

    def test_pair_count(self):
        """Test C(3, 2) * k samples for three stations."""
        matrix = _matrix(np.arange(1.0, 13.0).reshape(3, 4))
        assert len(sir_samples(matrix, _one_cluster(3), 0)) == 3 * 4

    def test_minmax_orientation(self):
        """Test that minmax ratios are never below one."""
        samples = sir_samples(
            _matrix([[10.0, 80.0], [40.0, 20.0]]), _one_cluster(2), 0, orientation="minmax"
        )
        assert [s.ratio for s in samples] == [4.0, 4.0]

    def test_singleton_cluster(self):
        """Test that a one-station cluster raises DegenerateCluster."""
        assignment = ClusterAssignment(labels=(0, 1), radius_m=1.0, representatives=(0, 1))
        with pytest.raises(DegenerateCluster):
            sir_samples(_matrix([[1.0, 2.0], [3.0, 4.0]]), assignment, 1)

    def test_requires_full_matrix(self):
        """Test that missing cells are rejected."""
        with pytest.raises(DataError, match="fully observed"):
            sir_samples(_matrix([[1.0, np.nan], [3.0, 4.0]]), _one_cluster(2), 0)

    def test_unknown_orientation(self):
        """Test that an unknown orientation raises error."""
        with pytest.raises(ValueError, match="Orientation must be one of"):
            sir_samples(_matrix([[1.0, 2.0], [3.0, 4.0]]), _one_cluster(2), 0, "ratio")


class TestTirSamples:
    """Tests for tir_samples."""

    def test_single_pair(self):
        """Test a two-step series."""
        samples = tir_samples(_matrix([[100.0, 50.0]]), 0, max_lag=5)
        assert samples == [LagRatioSample(2.0, 1.0)]

    def test_doubling_series(self):
        """Test ratios ordered by lag for 10, 20, 40."""
        samples = tir_samples(_matrix([[10.0, 20.0, 40.0]]), 0, max_lag=2)
        assert [(s.ratio, s.lag) for s in samples] == [(0.5, 1.0), (0.5, 1.0), (0.25, 2.0)]

    def test_constant_series(self):
        """Test that a constant series gives ratio one everywhere."""
        samples = tir_samples(_matrix([[7.0] * 6]), 0, max_lag=3)
        assert {s.ratio for s in samples} == {1.0}
        assert len(samples) == 5 + 4 + 3

    def test_invalid_max_lag(self):
        """Test that max_lag below one raises error."""
        with pytest.raises(ValueError, match="max_lag must be at least 1"):
            tir_samples(_matrix([[1.0, 2.0]]), 0, max_lag=0)


class TestLagDependence:
    """Tests for lag_dependence and LagDependence."""

    def test_max_per_bin(self):
        """Test that each bin keeps its largest lag."""
        samples = [LagRatioSample(2.0, 5), LagRatioSample(2.0, 9), LagRatioSample(3.0, 4)]
        dep = lag_dependence(samples, 0.5)
        assert dep.bins == ((2.0, 9.0), (3.0, 4.0))

    def test_single_sample(self):
        """Test a singleton."""
        dep = lag_dependence([LagRatioSample(1.3, 42.0)], 0.1)
        assert len(dep) == 1
        assert dep.max_lags.tolist() == [42.0]

    def test_matches_linear_scan(self):
        """Test every bin against a brute-force maximum."""
        rng = np.random.default_rng(17)
        ratios = rng.uniform(1.0, 3.0, 500)
        lags = rng.uniform(0.0, 100.0, 500)
        dep = lag_dependence([LagRatioSample(r, g) for r, g in zip(ratios, lags)], 0.25)

        keys = np.floor(ratios / 0.25 + 0.5)
        for center, max_lag in dep.bins:
            members = lags[np.isclose(keys * 0.25, center)]
            assert max_lag == members.max()

    def test_small_ratios_join_first_bin(self):
        """Test that bin centers stay positive for tiny ratios."""
        dep = lag_dependence([LagRatioSample(0.01, 3.0), LagRatioSample(0.5, 1.0)], 0.5)
        assert dep.centers[0] == 0.5
        assert dep.max_lags[0] == 3.0

    def test_empty(self):
        """Test that no samples raise DataError."""
        with pytest.raises(DataError):
            lag_dependence([], 0.5)

    def test_lookup_exact_and_nearest(self):
        """Test lookup in a populated bin and fallback to the nearest one."""
        dep = LagDependence(bins=((1.0, 10.0), (2.0, 30.0)), bin_width=0.5)
        assert dep.lookup(2.1) == (30.0, True)
        assert dep.lookup(3.4) == (30.0, False)
        assert dep.lookup(1.5) == (10.0, False)

    def test_rejects_unsorted_bins(self):
        """Test the ordering invariant."""
        with pytest.raises(ValueError, match="strictly increasing"):
            LagDependence(bins=((2.0, 1.0), (1.0, 1.0)), bin_width=0.5)


class TestEcdf:
    """Tests for ecdf."""

    def test_rank_over_n(self):
        """Test F(2) = 2/3 for max lags 1, 2, 3."""
        dep = LagDependence(bins=((1.0, 1.0), (2.0, 2.0), (3.0, 3.0)), bin_width=1.0)
        assert ecdf(dep)(2.0) == pytest.approx(2.0 / 3.0)

    def test_bounds(self):
        """Test zero below the support and one at or above its maximum."""
        dep = LagDependence(bins=((1.0, 5.0), (2.0, 8.0)), bin_width=1.0)
        cdf = ecdf(dep)
        assert cdf(4.99) == 0.0
        assert cdf(8.0) == 1.0
        assert cdf(100.0) == 1.0

    def test_matches_counting(self):
        """Test random max lags against direct counting."""
        rng = np.random.default_rng(5)
        lags = rng.integers(0, 30, 100).astype(float)
        dep = LagDependence(bins=tuple((i + 1.0, lag) for i, lag in enumerate(lags)), bin_width=1.0)
        cdf = ecdf(dep)
        for x in np.linspace(-1.0, 31.0, 20):
            assert cdf(x) == pytest.approx(np.mean(lags <= x), abs=1e-12)


class TestBinWidth:
    """Tests for Freedman-Diaconis widths."""

    def test_formula(self):
        """Test 2 * IQR * n^(-1/3)."""
        ratios = np.linspace(1.0, 9.0, 1000)
        expected = 2.0 * (7.0 - 3.0) * 1000 ** (-1.0 / 3.0)
        assert freedman_diaconis_width(ratios) == pytest.approx(expected, rel=1e-6)

    def test_floor(self):
        """Test that a zero IQR falls back to the floor."""
        assert freedman_diaconis_width([1.0] * 50) == DEFAULT_WIDTH_FLOOR

    def test_configured_width_wins(self):
        """Test that an explicit width is used as given."""
        assert resolve_bin_width([LagRatioSample(1.0, 1.0)], 0.3) == 0.3


class TestStationLagDependences:
    """Tests for station_lag_dependences and the CSV export."""

    def test_one_entry_per_station(self):
        """Test keys follow station ids."""
        deps = station_lag_dependences(_matrix([[1.0, 2.0, 4.0], [3.0, 3.0, 3.0]]), 2, 0.5)
        assert list(deps) == ["A", "B"]
        assert deps["B"].bins == ((1.0, 2.0),)

    def test_write_csv(self, tmp_path):
        """Test the lag dependence export."""
        dep = LagDependence(bins=((1.0, 10.0), (1.5, 2.0)), bin_width=0.5)
        path = tmp_path / "lagdep.csv"
        write_lag_dependence_csv([("spatial", "cluster:0", dep)], path)

        frame = pd.read_csv(path)
        assert list(frame.columns) == ["kind", "scope", "ratio_bin", "max_lag"]
        assert frame["max_lag"].tolist() == [10.0, 2.0]
        assert path.read_text().splitlines()[1] == "spatial,cluster:0,1.000000,10.000000"
