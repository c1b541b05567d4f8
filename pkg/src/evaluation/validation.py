"""Holdout and leave-one-station-out validation of the full pipeline.

Masked truth never reaches imputation or fitting: cells are hidden before
the pipeline runs and donors come from the masked observations only.
"""

import logging
from typing import List, Optional

import numpy as np

from ..config import PipelineConfig
from ..data.models import ObservationMatrix
from ..errors import DataError
from ..interpolation.interpolator import NoDonor, interpolate_point
from ..pipeline import fit_pipeline
from ..spatial.cluster import hsc
from .metrics import Empty, MetricReport


logger = logging.getLogger(__name__)

MIN_LOSO_STATIONS = 3


class InsufficientStations(DataError):
    """Too few stations to leave one out."""


def holdout_eval(
    matrix: ObservationMatrix,
    config: PipelineConfig,
    fraction: Optional[float] = None,
    seed: Optional[int] = None,
) -> MetricReport:
    """Hide a seeded random fraction of observed cells and score their prediction.

    Args:
        matrix: Raw observations
        config: Pipeline configuration
        fraction: Share of observed cells to hide (default evaluation.holdout_fraction)
        seed: Mask seed (default general.seed)

    Raises:
        Empty: If no cell ends up masked or none could be predicted
    """
    fraction = config.evaluation.holdout_fraction if fraction is None else fraction
    seed = config.general.seed if seed is None else seed
    if not 0 < fraction < 1:
        raise ValueError(f"Holdout fraction must be in (0, 1), got {fraction}")

    cells = np.argwhere(matrix.observed)
    count = int(round(fraction * len(cells)))
    if count == 0:
        raise Empty(f"Holdout fraction {fraction} masks no cell of {len(cells)} observed")

    rng = np.random.default_rng(seed)
    chosen = cells[np.sort(rng.choice(len(cells), size=count, replace=False))]
    values = np.array(matrix.values)
    values[chosen[:, 0], chosen[:, 1]] = np.nan
    masked = matrix.with_values(values, np.isfinite(values))
    logger.info(f"Holdout: {count} of {len(cells)} observed cells masked (seed {seed})")

    fitted = fit_pipeline(masked, config)
    predictions: List[float] = []
    truths: List[float] = []
    clusters: List[int] = []
    skipped = 0
    for i, j in chosen:
        station = matrix.stations[i]
        try:
            estimate = interpolate_point(
                masked,
                fitted.assignment,
                fitted.tables(),
                (station.lat, station.lon),
                int(j),
                config.interpolation.mode,
                config.interpolation.donors,
            )
        except NoDonor:
            skipped += 1
            continue
        predictions.append(estimate.value)
        truths.append(float(matrix.values[i, j]))
        clusters.append(fitted.assignment.labels[i])

    if skipped:
        logger.warning(f"Holdout: {skipped} masked cells had no donor and were not scored")
    report = MetricReport.from_predictions(predictions, truths, clusters)
    logger.info(f"Holdout: RMSE {report.rmse:.6f}, MAE {report.mae:.6f} over {report.n} cells")
    return report


def loso_eval(matrix: ObservationMatrix, config: PipelineConfig) -> MetricReport:
    """Refit without each station in turn and predict its observed series.

    Scores are grouped by the station's cluster in the full-network clustering.

    Raises:
        InsufficientStations: If fewer than three stations are given
    """
    if matrix.n_stations < MIN_LOSO_STATIONS:
        raise InsufficientStations(
            f"Leave-one-station-out needs at least {MIN_LOSO_STATIONS} stations, "
            f"got {matrix.n_stations}"
        )

    full = hsc(matrix.stations, config.cluster.radius_m, config.cluster.linkage)
    predictions: List[float] = []
    truths: List[float] = []
    clusters: List[int] = []

    for i, station in enumerate(matrix.stations):
        reduced = matrix.without_station(i)
        fitted = fit_pipeline(reduced, config)
        scored = 0
        for t in range(matrix.n_times):
            if not matrix.observed[i, t]:
                continue
            try:
                estimate = interpolate_point(
                    reduced,
                    fitted.assignment,
                    fitted.tables(),
                    (station.lat, station.lon),
                    t,
                    config.interpolation.mode,
                    config.interpolation.donors,
                )
            except NoDonor:
                continue
            predictions.append(estimate.value)
            truths.append(float(matrix.values[i, t]))
            clusters.append(full.labels[i])
            scored += 1
        logger.info(f"LOSO fold {station.id}: {scored} cells scored")

    report = MetricReport.from_predictions(predictions, truths, clusters)
    logger.info(f"LOSO: RMSE {report.rmse:.6f}, MAE {report.mae:.6f} over {report.n} cells")
    return report
