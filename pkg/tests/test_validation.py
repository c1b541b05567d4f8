"""Tests for holdout and leave-one-station-out validation."""

from datetime import date

import numpy as np
import pytest

from src.config import PipelineConfig
from src.data.models import Granularity, ObservationMatrix, TimeAxis
from src.evaluation.metrics import Empty
from src.evaluation.validation import InsufficientStations, holdout_eval, loso_eval
from src.synthetic import DELHI_STATIONS, sinusoid_matrix, sinusoid_series


@pytest.fixture
def config():
    """Small configuration interpolating in normalized mode."""
    return PipelineConfig.from_dict(
        {
            "general": {"seed": 3, "threads": 1},
            "paths": {"observations": "obs.csv", "stations": "stations.csv", "output_dir": "out"},
            "gapfill": {"hidden_size": 4, "window": 6, "epochs": 2, "learning_rate": 0.05},
            "lagdep": {"temporal_max_lag": 3},
            "margins": {"candidates": ["weibull", "gumbel"]},
            "lag_grid": {"h_steps": 30},
            "interpolation": {"mode": "normalized"},
        }
    )


@pytest.fixture
def complete():
    """Five phase-shifted sinusoid stations over three years."""
    full, _ = sinusoid_matrix(DELHI_STATIONS, n=36)
    return full


def _identical(count):
    values = np.vstack([sinusoid_series(n=24)] * count)
    axis = TimeAxis(date(2019, 1, 1), Granularity.ONE_MONTH, 24)
    return ObservationMatrix.from_values(list(DELHI_STATIONS[:count]), axis, values)


class TestHoldoutEval:
    """Tests for holdout_eval."""

    def test_scores_every_masked_cell(self, config, complete):
        """Test that each hidden cell is predicted once."""
        report = holdout_eval(complete, config, fraction=0.1, seed=5)
        assert report.n == 18
        assert sum(m.n for m in report.per_cluster.values()) == 18
        assert np.isfinite(report.rmse)
        assert report.rmse >= report.mae

    def test_deterministic(self, config, complete):
        """Test that one seed gives one score."""
        first = holdout_eval(complete, config, fraction=0.1, seed=5)
        second = holdout_eval(complete, config, fraction=0.1, seed=5)
        assert first.rmse == second.rmse
        assert first.mae == second.mae

    def test_defaults_from_config(self, config, complete):
        """Test that fraction and seed default to the configuration."""
        report = holdout_eval(complete, config)
        assert report.n == round(config.evaluation.holdout_fraction * 180)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, 1.5])
    def test_invalid_fraction(self, config, complete, fraction):
        """Test that the fraction must lie strictly between 0 and 1."""
        with pytest.raises(ValueError, match="Holdout fraction"):
            holdout_eval(complete, config, fraction=fraction)

    def test_nothing_masked(self, config, complete):
        """Test that a fraction rounding to zero cells raises Empty."""
        with pytest.raises(Empty, match="masks no cell"):
            holdout_eval(complete, config, fraction=0.001)


class TestLosoEval:
    """Tests for loso_eval."""

    def test_identical_stations_are_reproduced(self, config):
        """Test zero error when every station reports the same series."""
        report = loso_eval(_identical(3), config)
        assert report.n == 3 * 24
        assert report.rmse < 1e-9

    def test_two_stations(self, config):
        """Test that fewer than three stations raise InsufficientStations."""
        with pytest.raises(InsufficientStations, match="at least 3"):
            loso_eval(_identical(2), config)

    def test_clusters_from_full_network(self, config, complete):
        """Test that scores are grouped by full-network cluster labels."""
        report = loso_eval(complete, config)
        assert report.n == 5 * 36
        assert set(report.per_cluster) <= set(range(5))
