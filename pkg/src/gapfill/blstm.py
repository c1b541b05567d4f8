"""Bidirectional LSTM regressor used to fill gaps in station series.

The prediction at step t combines the forward state after x[0..t-1]
with the backward state after x[t+1..W-1], so an input never feeds its
own target and the model learns to reconstruct a cell from its
neighbours on both sides.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import TrainConfig
from ..errors import DataError
from .lstm import LstmCellParams, backprop_sequence, run_sequence


logger = logging.getLogger(__name__)

STD_FLOOR = 1e-12
GradientFn = Callable[..., Tuple[float, np.ndarray]]


class InsufficientData(DataError):
    """Series too short (or too sparse) for one full training window."""


@dataclass(frozen=True)
class BlstmModel:
    """Trained bidirectional model with its normalization.

    Attributes:
        forward: Left-to-right cell
        backward: Right-to-left cell
        w_out: (2H,) output projection, forward half first
        b_out: Output bias
        mean: Series mean used for z-scoring
        std: Series std used for z-scoring (> 0)
        seed: Seed the model was initialized from
    """

    forward: LstmCellParams
    backward: LstmCellParams
    w_out: np.ndarray
    b_out: float
    mean: float
    std: float
    seed: int

    def __post_init__(self) -> None:
        """Validate cell sizes and normalization."""
        hidden = self.forward.hidden_size
        if self.backward.hidden_size != hidden:
            raise ValueError(
                f"Forward and backward cells differ in size: "
                f"{hidden} != {self.backward.hidden_size}"
            )
        if np.shape(self.w_out) != (2 * hidden,):
            raise ValueError(f"w_out must have shape ({2 * hidden},), got {np.shape(self.w_out)}")
        if not self.std > 0:
            raise ValueError(f"Normalization std must be positive, got {self.std}")

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size

    def to_vector(self) -> np.ndarray:
        """Flatten every trainable parameter (forward, backward, w_out, b_out)."""
        return np.concatenate(
            [self.forward.to_vector(), self.backward.to_vector(), self.w_out, [self.b_out]]
        )

    def with_vector(self, vector: np.ndarray) -> "BlstmModel":
        """Copy of this model with parameters taken from a flat vector."""
        hidden = self.hidden_size
        cell = self.forward.size
        return BlstmModel(
            forward=LstmCellParams.from_vector(vector[:cell], hidden),
            backward=LstmCellParams.from_vector(vector[cell:2 * cell], hidden),
            w_out=np.array(vector[2 * cell:2 * cell + 2 * hidden]),
            b_out=float(vector[-1]),
            mean=self.mean,
            std=self.std,
            seed=self.seed,
        )

    @classmethod
    def initialize(cls, hidden: int, mean: float, std: float, seed: int) -> "BlstmModel":
        """Fresh model drawn from a seeded generator."""
        rng = np.random.default_rng(seed)
        forward = LstmCellParams.initialize(hidden, rng)
        backward = LstmCellParams.initialize(hidden, rng)
        limit = np.sqrt(6.0 / (2 * hidden + 1))
        w_out = rng.uniform(-limit, limit, size=2 * hidden)
        return cls(forward, backward, w_out, 0.0, float(mean), float(std), int(seed))


def blstm_forward(model: BlstmModel, window: np.ndarray) -> np.ndarray:
    """Predict every step of a window.

    Args:
        model: Trained model
        window: Values in field units with gaps already filled by the series mean

    Returns:
        Denormalized predictions, one per step
    """
    x = _normalize(model, window)
    y, _ = _forward(model, x)
    return y * model.std + model.mean


def loss_and_gradient(
    model: BlstmModel,
    window: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """Masked mean squared error in normalized units and its parameter gradient.

    Returns:
        (loss, gradient flattened like BlstmModel.to_vector)
    """
    return _loss_and_gradient(
        model, _normalize(model, window), _normalize(model, targets), np.asarray(mask, dtype=bool)
    )


def train(
    series: np.ndarray,
    cfg: TrainConfig,
    mask: Optional[np.ndarray] = None,
) -> BlstmModel:
    """Train a model on one series.

    Args:
        series: Time-ordered values; NaN where missing
        cfg: Training hyperparameters
        mask: Observed mask (default: finite entries of `series`)

    Returns:
        Model whose training loss is no greater than at initialization

    Raises:
        InsufficientData: If the series is shorter than one window or has no observations
    """
    return train_pooled([series], cfg, None if mask is None else [mask])


def train_pooled(
    series_list: Sequence[np.ndarray],
    cfg: TrainConfig,
    masks: Optional[Sequence[np.ndarray]] = None,
) -> BlstmModel:
    """Train one model on the sliding windows of several series.

    Normalization statistics are pooled over every observed value.

    Raises:
        InsufficientData: If no series yields a window with an observed target
    """
    if masks is None:
        masks = [np.isfinite(np.asarray(s, dtype=float)) for s in series_list]
    arrays = [np.asarray(s, dtype=float) for s in series_list]
    masks = [np.asarray(m, dtype=bool) for m in masks]

    observed = np.concatenate([a[m] for a, m in zip(arrays, masks)]) if arrays else np.array([])
    if observed.size == 0:
        raise InsufficientData("Series has no observed values")
    if all(len(a) < cfg.window for a in arrays):
        raise InsufficientData(
            f"Series of length {max(len(a) for a in arrays)} is shorter than "
            f"one window ({cfg.window})"
        )

    mean = float(observed.mean())
    std = float(observed.std())
    if std < STD_FLOOR:
        std = 1.0

    windows: List[Tuple[np.ndarray, np.ndarray]] = []
    for values, observed_mask in zip(arrays, masks):
        if len(values) < cfg.window:
            continue
        x = np.where(observed_mask, (values - mean) / std, 0.0)
        for start in range(len(values) - cfg.window + 1):
            window_mask = observed_mask[start:start + cfg.window]
            if window_mask.any():
                windows.append((x[start:start + cfg.window], window_mask))
    if not windows:
        raise InsufficientData("No window contains an observed value")

    model = BlstmModel.initialize(cfg.hidden_size, mean, std, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    params = model.to_vector()
    best_params = params.copy()
    best_loss = initial_loss = _epoch_loss(model, windows)

    for epoch in range(cfg.epochs):
        for k in rng.permutation(len(windows)):
            x, window_mask = windows[k]
            _, grad = _loss_and_gradient(model, x, x, window_mask)
            norm = float(np.linalg.norm(grad))
            if norm > cfg.clip_norm:
                grad = grad * (cfg.clip_norm / norm)
            params = params - cfg.learning_rate * grad
            model = model.with_vector(params)

        loss = _epoch_loss(model, windows)
        if loss < best_loss:
            best_loss, best_params = loss, params.copy()
        if (epoch + 1) % 50 == 0:
            logger.debug(f"Epoch {epoch + 1}/{cfg.epochs}: loss {loss:.6f}")

    logger.debug(
        f"Trained BLSTM (H={cfg.hidden_size}, W={cfg.window}, seed={cfg.seed}) on "
        f"{len(windows)} windows: loss {initial_loss:.6f} -> {best_loss:.6f}"
    )
    return model.with_vector(best_params)


def gradient_check(
    model: BlstmModel,
    window: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
    epsilon: float = 1e-5,
    gradient_fn: Optional[GradientFn] = None,
) -> float:
    """Compare analytic gradients with central finite differences.

    Args:
        model: Model to differentiate
        window: Inputs in field units
        targets: Targets in field units
        mask: Positions that contribute to the loss
        epsilon: Finite-difference step
        gradient_fn: Analytic gradient under test (default: loss_and_gradient)

    Returns:
        Maximum relative error |a - n| / max(|a|, |n|, 1e-6) over all parameters
    """
    gradient_fn = gradient_fn or loss_and_gradient
    _, analytic = gradient_fn(model, window, targets, mask)

    base = model.to_vector()
    numeric = np.empty_like(base)
    for i in range(base.size):
        step = np.zeros_like(base)
        step[i] = epsilon
        plus, _ = loss_and_gradient(model.with_vector(base + step), window, targets, mask)
        minus, _ = loss_and_gradient(model.with_vector(base - step), window, targets, mask)
        numeric[i] = (plus - minus) / (2.0 * epsilon)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / scale))


def save_model(model: BlstmModel, path: Union[str, Path]) -> None:
    """Dump every parameter array with its dimensions as JSON."""
    payload = {
        "hidden_size": model.hidden_size,
        "seed": model.seed,
        "mean": model.mean,
        "std": model.std,
        "forward": _cell_to_dict(model.forward),
        "backward": _cell_to_dict(model.backward),
        "w_out": model.w_out.tolist(),
        "b_out": model.b_out,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: Union[str, Path]) -> BlstmModel:
    """Load a model written by save_model.

    Raises:
        DataError: If the file is not a valid model dump
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        hidden = int(payload["hidden_size"])
        model = BlstmModel(
            forward=_cell_from_dict(payload["forward"]),
            backward=_cell_from_dict(payload["backward"]),
            w_out=np.array(payload["w_out"], dtype=float),
            b_out=float(payload["b_out"]),
            mean=float(payload["mean"]),
            std=float(payload["std"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Invalid model file {path}: {e}") from e
    if model.hidden_size != hidden:
        raise DataError(f"Invalid model file {path}: hidden size mismatch")
    return model


def _normalize(model: BlstmModel, values: np.ndarray) -> np.ndarray:
    return (np.asarray(values, dtype=float) - model.mean) / model.std


def _forward(model: BlstmModel, x: np.ndarray):
    """Normalized predictions plus everything backpropagation needs."""
    hidden = model.hidden_size
    hs_f, caches_f = run_sequence(model.forward, x)
    hs_b, caches_b = run_sequence(model.backward, x[::-1])
    width = len(x)
    states_f = hs_f[:width]
    # backward state after x[t+1..W-1] sits at hs_b[W-1-t]
    states_b = hs_b[:width][::-1]
    y = states_f @ model.w_out[:hidden] + states_b @ model.w_out[hidden:] + model.b_out
    return y, (hs_f, caches_f, hs_b, caches_b, states_f, states_b)


def _loss_and_gradient(
    model: BlstmModel,
    x: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
) -> Tuple[float, np.ndarray]:
    count = int(mask.sum())
    if count == 0:
        return 0.0, np.zeros(model.to_vector().size)

    hidden = model.hidden_size
    y, (hs_f, caches_f, hs_b, caches_b, states_f, states_b) = _forward(model, x)
    residual = np.where(mask, y - np.where(mask, targets, 0.0), 0.0)
    loss = float(np.sum(residual ** 2) / count)
    dy = 2.0 * residual / count

    g_w_out = np.concatenate([dy @ states_f, dy @ states_b])
    g_b_out = float(dy.sum())

    width = len(x)
    dhs_f = np.zeros_like(hs_f)
    dhs_f[:width] = dy[:, None] * model.w_out[:hidden]
    dhs_b = np.zeros_like(hs_b)
    dhs_b[:width] = (dy[:, None] * model.w_out[hidden:])[::-1]

    g_forward = backprop_sequence(model.forward, caches_f, dhs_f)
    g_backward = backprop_sequence(model.backward, caches_b, dhs_b)
    grad = np.concatenate(
        [g_forward.to_vector(), g_backward.to_vector(), g_w_out, [g_b_out]]
    )
    return loss, grad


def _epoch_loss(model: BlstmModel, windows: List[Tuple[np.ndarray, np.ndarray]]) -> float:
    """Mean window loss over the training set."""
    total = 0.0
    for x, window_mask in windows:
        y, _ = _forward(model, x)
        total += float(np.mean((y[window_mask] - x[window_mask]) ** 2))
    return total / len(windows)


def _cell_to_dict(cell: LstmCellParams) -> dict:
    return {
        "w_x": {"shape": list(cell.w_x.shape), "values": cell.w_x.ravel().tolist()},
        "w_h": {"shape": list(cell.w_h.shape), "values": cell.w_h.ravel().tolist()},
        "b": {"shape": list(cell.b.shape), "values": cell.b.ravel().tolist()},
    }


def _cell_from_dict(data: dict) -> LstmCellParams:
    arrays = {
        name: np.array(data[name]["values"], dtype=float).reshape(data[name]["shape"])
        for name in ("w_x", "w_h", "b")
    }
    return LstmCellParams(**arrays)
