"""Fill every missing cell of an observation matrix.

One BLSTM per station (or per cluster when pooling), trained on the
observed cells only. Stations that cannot support training fall back
to linear interpolation, and stations without any observation take the
cross-station mean of each time bucket. Every fallback is reported.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..config import TrainConfig
from ..data.models import ClusterAssignment, ObservationMatrix
from ..errors import DataError
from ..evaluation.metrics import rmse
from .blstm import BlstmModel, InsufficientData, blstm_forward, train, train_pooled


logger = logging.getLogger(__name__)

VALUE_FLOOR = 1e-6

FALLBACK_NONE = "none"
FALLBACK_LINEAR = "linear"
FALLBACK_STATION_MEAN = "station_mean"


@dataclass(frozen=True)
class ImputationRow:
    """Per-station imputation outcome."""

    station_id: str
    n_imputed: int
    fallback_used: str


@dataclass(frozen=True)
class ImputationResult:
    """Filled matrix plus its report and the models that produced it."""

    matrix: ObservationMatrix
    report: Tuple[ImputationRow, ...]
    models: Dict[str, BlstmModel]

    @property
    def fallback_stations(self) -> List[str]:
        return [row.station_id for row in self.report if row.fallback_used != FALLBACK_NONE]


@dataclass(frozen=True)
class SplitScore:
    """Chronological validation of the imputer on one series."""

    rmse: float
    mean_rmse: float
    n: int


def impute(matrix: ObservationMatrix, cfg: TrainConfig) -> ObservationMatrix:
    """Return a fully observed copy of `matrix`; observed cells are unchanged."""
    return impute_with_report(matrix, cfg).matrix


def impute_with_report(
    matrix: ObservationMatrix,
    cfg: TrainConfig,
    threads: int = 1,
    assignment: Optional[ClusterAssignment] = None,
    pooling: str = "station",
) -> ImputationResult:
    """Impute the matrix and report what happened per station.

    Args:
        matrix: Matrix with missing cells
        cfg: Training hyperparameters; station i trains with seed cfg.seed + i
        threads: Worker cap for per-station training
        assignment: Cluster assignment, required when pooling == "cluster"
        pooling: "station" for one model per station, "cluster" for one per cluster

    Returns:
        ImputationResult with a fully observed matrix

    Raises:
        DataError: If the matrix has no observed cell at all
    """
    if not matrix.observed.any():
        raise DataError("Cannot impute a matrix without any observed cell")
    if pooling == "cluster" and assignment is None:
        raise ValueError("Cluster pooling needs a cluster assignment")

    if matrix.fully_observed:
        report = tuple(ImputationRow(sid, 0, FALLBACK_NONE) for sid in matrix.station_ids)
        return ImputationResult(matrix, report, {})

    values = np.array(matrix.values)
    models = _train_models(matrix, cfg, threads, assignment, pooling)

    rows: List[ImputationRow] = []
    empty_rows: List[int] = []
    for i, station in enumerate(matrix.stations):
        series = matrix.values[i]
        observed = matrix.observed[i]
        missing = int((~observed).sum())
        if missing == 0:
            rows.append(ImputationRow(station.id, 0, FALLBACK_NONE))
            continue
        if not observed.any():
            empty_rows.append(i)
            rows.append(ImputationRow(station.id, missing, FALLBACK_STATION_MEAN))
            continue

        model = models.get(station.id)
        filled = None if model is None else _fill_with_model(model, series, observed, cfg.window)
        if filled is None:
            values[i] = _linear_fill(series, observed)
            rows.append(ImputationRow(station.id, missing, FALLBACK_LINEAR))
        else:
            values[i] = filled
            rows.append(ImputationRow(station.id, missing, FALLBACK_NONE))

    if empty_rows:
        _fill_empty_stations(values, matrix, empty_rows)

    values = np.where(matrix.observed, matrix.values, np.maximum(values, VALUE_FLOOR))
    filled_matrix = matrix.with_values(values, np.ones_like(matrix.observed, dtype=bool))

    for row in rows:
        if row.fallback_used != FALLBACK_NONE:
            logger.warning(
                f"Station {row.station_id}: {row.n_imputed} cells filled by "
                f"{row.fallback_used} fallback"
            )
    imputed = sum(row.n_imputed for row in rows)
    logger.info(f"Imputed {imputed} cells across {matrix.n_stations} stations")
    return ImputationResult(filled_matrix, tuple(rows), models)


def evaluate_split(
    series: np.ndarray,
    cfg: TrainConfig,
    fraction: float = 0.2,
) -> SplitScore:
    """Train on the chronological head and score held-out reconstruction on the tail.

    Each observed tail cell is hidden in turn and predicted from its window;
    the same cells are also scored against the head mean for comparison.

    Raises:
        InsufficientData: If the head is shorter than one window or the tail is empty
    """
    series = np.asarray(series, dtype=float)
    observed = np.isfinite(series)
    split = int(round(len(series) * (1.0 - fraction)))
    head = series[:split]
    if split < cfg.window:
        raise InsufficientData(f"Head of {split} steps is shorter than one window")
    tail_cells = [t for t in range(split, len(series)) if observed[t]]
    if not tail_cells:
        raise InsufficientData("Tail has no observed cells to score")

    model = train(head, cfg)
    predictions, truths = [], []
    for t in tail_cells:
        hidden = observed.copy()
        hidden[t] = False
        fill = float(series[hidden].mean())
        window, offset = _window_for(series, hidden, t, cfg.window, fill)
        predictions.append(max(float(blstm_forward(model, window)[offset]), VALUE_FLOOR))
        truths.append(float(series[t]))

    baseline = [model.mean] * len(truths)
    score = SplitScore(rmse(predictions, truths), rmse(baseline, truths), len(truths))
    logger.info(
        f"Chronological split: BLSTM RMSE {score.rmse:.6f} vs mean RMSE "
        f"{score.mean_rmse:.6f} over {score.n} cells"
    )
    return score


def write_imputation_report(result: ImputationResult, path: Union[str, Path]) -> None:
    """Write columns station_id, n_imputed, fallback_used."""
    frame = pd.DataFrame(
        [(r.station_id, r.n_imputed, r.fallback_used) for r in result.report],
        columns=["station_id", "n_imputed", "fallback_used"],
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def _train_models(
    matrix: ObservationMatrix,
    cfg: TrainConfig,
    threads: int,
    assignment: Optional[ClusterAssignment],
    pooling: str,
) -> Dict[str, BlstmModel]:
    """Train every model needed, assembled in station order."""
    needy = [
        i for i in range(matrix.n_stations)
        if not matrix.observed[i].all() and _trainable(matrix.observed[i], cfg.window)
    ]
    if not needy:
        return {}

    if pooling == "station":
        jobs = [(i, [i]) for i in needy]
    else:
        jobs = []
        for cluster in range(assignment.n_clusters):
            members = assignment.members(cluster)
            if any(i in needy for i in members):
                donors = [i for i in members if _trainable(matrix.observed[i], cfg.window)]
                jobs.append((min(donors), donors))

    def fit(job: Tuple[int, List[int]]) -> Optional[BlstmModel]:
        anchor, members = job
        job_cfg = replace(cfg, seed=cfg.seed + anchor)
        try:
            return train_pooled(
                [matrix.values[i] for i in members],
                job_cfg,
                [matrix.observed[i] for i in members],
            )
        except InsufficientData as e:
            logger.warning(f"Station {matrix.stations[anchor].id}: {e}")
            return None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        trained = list(pool.map(fit, jobs))

    models: Dict[str, BlstmModel] = {}
    for (_, members), model in zip(jobs, trained):
        if model is None:
            continue
        for i in members:
            if i in needy:
                models[matrix.stations[i].id] = model
    return models


def _trainable(observed: np.ndarray, window: int) -> bool:
    return len(observed) >= window and int(observed.sum()) >= 2


def _window_for(
    series: np.ndarray,
    observed: np.ndarray,
    t: int,
    width: int,
    fill: float,
) -> Tuple[np.ndarray, int]:
    """Window of `width` roughly centred on t with gaps set to `fill`, and t's offset in it."""
    start = min(max(t - width // 2, 0), len(series) - width)
    window = np.where(observed, series, fill)[start:start + width]
    return window, t - start


def _fill_with_model(
    model: BlstmModel,
    series: np.ndarray,
    observed: np.ndarray,
    width: int,
) -> Optional[np.ndarray]:
    """Predict each missing cell; None if any prediction is non-finite."""
    filled = np.array(series)
    # gaps start at the station's own mean, not the pooled one
    own_mean = float(series[observed].mean())
    for t in np.flatnonzero(~observed):
        window, offset = _window_for(series, observed, int(t), width, own_mean)
        value = float(blstm_forward(model, window)[offset])
        if not np.isfinite(value):
            return None
        filled[t] = max(value, VALUE_FLOOR)
    return filled


def _linear_fill(series: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Linear interpolation between observed cells, constant beyond the ends."""
    positions = np.arange(len(series))
    return np.interp(positions, positions[observed], series[observed])


def _fill_empty_stations(
    values: np.ndarray,
    matrix: ObservationMatrix,
    rows: List[int],
) -> None:
    """Fill all-missing stations with the mean of observed stations per bucket."""
    global_mean = float(np.mean(matrix.values[matrix.observed]))
    for j in range(matrix.n_times):
        column = matrix.values[matrix.observed[:, j], j]
        fill = float(column.mean()) if column.size else global_mean
        for i in rows:
            values[i, j] = fill
