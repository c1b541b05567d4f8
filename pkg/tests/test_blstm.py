"""Tests for the bidirectional LSTM regressor."""

import json

import numpy as np
import pytest

from src.config import TrainConfig
from src.errors import DataError
from src.gapfill.blstm import (
    BlstmModel,
    InsufficientData,
    blstm_forward,
    gradient_check,
    load_model,
    loss_and_gradient,
    save_model,
    train,
    train_pooled,
)
from src.gapfill.lstm import LstmCellParams
from src.synthetic import sinusoid_series


def _window_case(width, seed):
    rng = np.random.default_rng(seed)
    window = 50.0 + 20.0 * rng.standard_normal(width)
    mask = rng.random(width) < 0.7
    mask[0] = True
    return window, mask


def _mean_window_loss(model, series, width):
    losses = []
    for start in range(len(series) - width + 1):
        window = series[start:start + width]
        loss, _ = loss_and_gradient(model, window, window, np.ones(width, dtype=bool))
        losses.append(loss)
    return float(np.mean(losses))


@pytest.fixture
def small_cfg():
    """Short training run."""
    return TrainConfig(hidden_size=4, window=8, learning_rate=0.05, epochs=5, seed=3)


class TestBlstmModel:
    """Tests for BlstmModel."""

    def test_initialize_is_seeded(self):
        """Test that equal seeds give equal parameters."""
        a = BlstmModel.initialize(4, 50.0, 10.0, seed=7)
        b = BlstmModel.initialize(4, 50.0, 10.0, seed=7)
        np.testing.assert_array_equal(a.to_vector(), b.to_vector())

    def test_vector_round_trip(self):
        """Test with_vector(to_vector()) is the identity."""
        model = BlstmModel.initialize(3, 0.0, 1.0, seed=1)
        rebuilt = model.with_vector(model.to_vector())
        np.testing.assert_array_equal(rebuilt.to_vector(), model.to_vector())
        assert rebuilt.mean == model.mean

    def test_rejects_zero_std(self):
        """Test that a zero normalization std is rejected."""
        with pytest.raises(ValueError, match="std must be positive"):
            BlstmModel.initialize(2, 1.0, 0.0, seed=0)


class TestBlstmForward:
    """Tests for blstm_forward."""

    def test_one_prediction_per_step(self):
        """Test output length and finiteness."""
        model = BlstmModel.initialize(4, 50.0, 10.0, seed=0)
        y = blstm_forward(model, np.linspace(30.0, 70.0, 9))
        assert y.shape == (9,)
        assert np.all(np.isfinite(y))

    def test_prediction_ignores_own_input(self):
        """Test that changing x[t] leaves the prediction at t unchanged."""
        model = BlstmModel.initialize(4, 50.0, 10.0, seed=2)
        window = np.linspace(30.0, 70.0, 9)
        changed = window.copy()
        changed[4] += 25.0
        np.testing.assert_allclose(
            blstm_forward(model, window)[4], blstm_forward(model, changed)[4], rtol=1e-12
        )

    def test_zero_network_predicts_bias(self):
        """Test that all-zero weights predict b_out * std + mean at every step."""
        hidden = 3
        cell = LstmCellParams.from_vector(np.zeros(4 * hidden + 4 * hidden * hidden), hidden)
        model = BlstmModel(cell, cell, np.zeros(2 * hidden), 0.5, 40.0, 8.0, seed=0)
        y = blstm_forward(model, np.array([12.0, 90.0, 33.0, 57.0, 41.0]))
        np.testing.assert_allclose(y, np.full(5, 0.5 * 8.0 + 40.0), rtol=1e-12)

    def test_shared_cells_are_reversal_symmetric(self):
        """Test that one cell in both directions maps a reversed window to a reversed output."""
        seeded = BlstmModel.initialize(4, 50.0, 10.0, seed=6)
        half = seeded.w_out[:4]
        model = BlstmModel(
            seeded.forward, seeded.forward, np.concatenate([half, half]), 0.2, 50.0, 10.0, seed=6
        )
        window = np.array([31.0, 64.0, 47.0, 52.0, 70.0, 38.0, 45.0])
        np.testing.assert_allclose(
            blstm_forward(model, window[::-1]), blstm_forward(model, window)[::-1], rtol=1e-12
        )


class TestGradientCheck:
    """Tests for analytic gradients."""

    @pytest.mark.parametrize("hidden,width", [(2, 5), (4, 10)])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, hidden, width, seed):
        """Test that the analytic gradient agrees within 1e-4 relative error."""
        window, mask = _window_case(width, seed)
        model = BlstmModel.initialize(hidden, float(window.mean()), float(window.std()), seed)
        assert gradient_check(model, window, window, mask, epsilon=1e-5) < 1e-4

    def test_detects_wrong_gradient(self):
        """Test that a perturbed gradient is caught."""
        window, mask = _window_case(6, 4)
        model = BlstmModel.initialize(3, float(window.mean()), float(window.std()), 4)

        def perturbed(m, w, t, k):
            loss, grad = loss_and_gradient(m, w, t, k)
            grad = grad.copy()
            grad[0] += 0.5
            return loss, grad

        assert gradient_check(model, window, window, mask, gradient_fn=perturbed) > 1e-2

    def test_empty_mask_has_zero_gradient(self):
        """Test that a window without observed targets contributes nothing."""
        model = BlstmModel.initialize(2, 0.0, 1.0, seed=0)
        loss, grad = loss_and_gradient(model, np.ones(4), np.ones(4), np.zeros(4, dtype=bool))
        assert loss == 0.0
        assert not grad.any()


class TestTrain:
    """Tests for train and train_pooled."""

    def test_loss_does_not_increase(self, small_cfg):
        """Test that the returned model is no worse than its initialization."""
        series = sinusoid_series(n=40)
        model = train(series, small_cfg)
        initial = BlstmModel.initialize(
            small_cfg.hidden_size, float(series.mean()), float(series.std()), small_cfg.seed
        )
        assert _mean_window_loss(model, series, small_cfg.window) <= _mean_window_loss(
            initial, series, small_cfg.window
        )

    def test_deterministic(self, small_cfg):
        """Test that training twice with one seed gives identical weights."""
        series = sinusoid_series(n=30)
        a = train(series, small_cfg)
        b = train(series, small_cfg)
        np.testing.assert_array_equal(a.to_vector(), b.to_vector())

    def test_normalization_from_observed_only(self, small_cfg):
        """Test that missing cells do not enter the mean."""
        series = np.array([10.0, np.nan, 30.0] * 4)
        model = train(series, small_cfg)
        assert model.mean == pytest.approx(20.0)

    def test_constant_series_uses_unit_std(self, small_cfg):
        """Test the std floor on a flat series."""
        model = train(np.full(12, 7.0), small_cfg)
        assert model.std == 1.0

    def test_short_series(self, small_cfg):
        """Test that a series shorter than one window raises InsufficientData."""
        with pytest.raises(InsufficientData, match="shorter than"):
            train(np.arange(1.0, 6.0), small_cfg)

    def test_nothing_observed(self, small_cfg):
        """Test that an all-missing series raises InsufficientData."""
        with pytest.raises(InsufficientData, match="no observed values"):
            train(np.full(20, np.nan), small_cfg)

    def test_insufficient_data_is_data_error(self):
        """Test the error hierarchy."""
        assert issubclass(InsufficientData, DataError)

    def test_pooled_skips_short_series(self, small_cfg):
        """Test that pooling trains when at least one series is long enough."""
        model = train_pooled([np.arange(1.0, 4.0), sinusoid_series(n=20)], small_cfg)
        assert model.hidden_size == small_cfg.hidden_size


class TestModelFiles:
    """Tests for save_model and load_model."""

    def test_save_then_load(self, tmp_path):
        """Test that every parameter survives the JSON dump."""
        model = BlstmModel.initialize(3, 42.0, 5.0, seed=9)
        path = tmp_path / "S01.json"
        save_model(model, path)

        restored = load_model(path)
        np.testing.assert_array_equal(restored.to_vector(), model.to_vector())
        assert (restored.mean, restored.std, restored.seed) == (42.0, 5.0, 9)

    def test_dump_records_shapes(self, tmp_path):
        """Test that arrays are stored with their dimensions."""
        path = tmp_path / "model.json"
        save_model(BlstmModel.initialize(2, 0.0, 1.0, seed=0), path)
        payload = json.loads(path.read_text())
        assert payload["hidden_size"] == 2
        assert payload["forward"]["w_h"]["shape"] == [4, 2, 2]

    def test_missing_key(self, tmp_path):
        """Test that an incomplete dump raises DataError."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"hidden_size": 2}))
        with pytest.raises(DataError, match="Invalid model file"):
            load_model(path)

    def test_hidden_size_mismatch(self, tmp_path):
        """Test that a wrong declared hidden size is rejected."""
        path = tmp_path / "model.json"
        save_model(BlstmModel.initialize(2, 0.0, 1.0, seed=0), path)
        payload = json.loads(path.read_text())
        payload["hidden_size"] = 5
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError, match="hidden size mismatch"):
            load_model(path)
