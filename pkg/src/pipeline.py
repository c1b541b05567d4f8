"""End-to-end fitting of the interpolation model.

cluster -> impute -> influence ratios -> lag dependence -> margins ->
copula -> lag grid -> STIR table, once per cluster. Clusters that cannot
support their own spatial statistics (a single station, or a numerical
failure) use a model fitted on all stations pooled as one region.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import MarginsConfig, PipelineConfig
from .data.models import ClusterAssignment, ObservationMatrix
from .errors import DataError, NumericError
from .gapfill.impute import ImputationResult, impute_with_report
from .interpolation.interpolator import (
    LagGrid,
    PointEstimate,
    StirTable,
    build_stir_table,
    interpolate_point,
)
from .spatial.cluster import hsc
from .stats.copula import GhParam, InsufficientPairs, JointModel, fit_theta, paired_lag_values
from .stats.evd import MIN_SELECT_SAMPLES, FittedMargin, point_mass_margin, select_model
from .stats.lagdep import (
    LagDependence,
    LagRatioSample,
    lag_dependence,
    resolve_bin_width,
    sir_samples,
    tir_samples,
)


logger = logging.getLogger(__name__)

POOLED = -1


@dataclass(frozen=True)
class ClusterModel:
    """Everything interpolation needs for one cluster.

    Attributes:
        cluster: Cluster index (POOLED for the all-station model)
        members: Station indices the statistics were computed from
        dep_h: Spatial lag dependence (SLD)
        dep_tau: Temporal lag dependence (TLD), pooled over members
        joint: Copula over the fitted lag margins
        grid: Argmax search grid
        table: Most-likely-lag table
        pooled: True when this cluster borrows the pooled model
    """

    cluster: int
    members: Tuple[int, ...]
    dep_h: LagDependence
    dep_tau: LagDependence
    joint: JointModel
    grid: LagGrid
    table: StirTable
    pooled: bool = False


@dataclass(frozen=True)
class FittedPipeline:
    """Fitted model plus the matrices it came from."""

    raw: ObservationMatrix
    matrix: ObservationMatrix
    assignment: ClusterAssignment
    imputation: Optional[ImputationResult]
    clusters: Dict[int, ClusterModel]

    def tables(self) -> Dict[int, StirTable]:
        return {c: model.table for c, model in self.clusters.items()}


def fit_pipeline(
    matrix: ObservationMatrix,
    config: PipelineConfig,
    assignment: Optional[ClusterAssignment] = None,
) -> FittedPipeline:
    """Cluster (unless given), impute and fit every cluster model."""
    if assignment is None:
        assignment = hsc(matrix.stations, config.cluster.radius_m, config.cluster.linkage)

    imputation = impute_with_report(
        matrix,
        config.gapfill.train,
        threads=config.general.threads,
        assignment=assignment,
        pooling=config.gapfill.pooling,
    )
    clusters = fit_cluster_models(imputation.matrix, assignment, config)
    return FittedPipeline(matrix, imputation.matrix, assignment, imputation, clusters)


def fit_cluster_models(
    matrix: ObservationMatrix,
    assignment: ClusterAssignment,
    config: PipelineConfig,
) -> Dict[int, ClusterModel]:
    """Fit one model per cluster of an imputed matrix, with pooled fallback.

    Raises:
        DataError: If a fallback is needed but the pooled model cannot be fitted either
    """
    def fit(cluster: int) -> Optional[ClusterModel]:
        members = assignment.members(cluster)
        try:
            return fit_cluster_model(matrix, assignment, cluster, config)
        except (DataError, NumericError) as e:
            logger.warning(
                f"Cluster {cluster} ({len(members)} stations) uses the pooled model: {e}"
            )
            return None

    with ThreadPoolExecutor(max_workers=config.general.threads) as pool:
        fitted = list(pool.map(fit, range(assignment.n_clusters)))

    pooled: Optional[ClusterModel] = None
    models: Dict[int, ClusterModel] = {}
    for cluster, model in enumerate(fitted):
        if model is None:
            if pooled is None:
                pooled = fit_pooled_model(matrix, config)
            model = replace(
                pooled, cluster=cluster, members=tuple(assignment.members(cluster)), pooled=True
            )
        models[cluster] = model
    return models


def fit_pooled_model(matrix: ObservationMatrix, config: PipelineConfig) -> ClusterModel:
    """Model fitted with every station treated as one region."""
    everything = ClusterAssignment(
        labels=tuple(0 for _ in matrix.stations),
        radius_m=float("inf"),
        representatives=(0,),
    )
    model = fit_cluster_model(matrix, everything, 0, config)
    return replace(model, cluster=POOLED, pooled=True)


def fit_cluster_model(
    matrix: ObservationMatrix,
    assignment: ClusterAssignment,
    cluster: int,
    config: PipelineConfig,
) -> ClusterModel:
    """Lag statistics, margins, copula and STIR table of one cluster.

    Raises:
        DegenerateCluster: If the cluster has a single station
        NumericError: If no lag grid or no feasible table row exists
    """
    lag_cfg = config.lagdep
    members = assignment.members(cluster)

    spatial = sir_samples(matrix, assignment, cluster, lag_cfg.orientation)
    dep_h = lag_dependence(spatial, resolve_bin_width(spatial, lag_cfg.bin_width))

    temporal: List[LagRatioSample] = []
    for i in members:
        temporal.extend(tir_samples(matrix, i, lag_cfg.temporal_max_lag, lag_cfg.orientation))
    dep_tau = lag_dependence(temporal, resolve_bin_width(temporal, lag_cfg.bin_width))

    margin_h = fit_margin(dep_h.max_lags, config.margins, f"cluster {cluster} spatial")
    margin_tau = fit_margin(dep_tau.max_lags, config.margins, f"cluster {cluster} temporal")
    copula = estimate_theta(dep_h, dep_tau, f"cluster {cluster}")
    joint = JointModel(copula=copula, margin_h=margin_h, margin_tau=margin_tau)

    grid = LagGrid.from_margins(
        margin_h,
        lag_cfg.temporal_max_lag,
        config.lag_grid.h_steps,
        config.lag_grid.quantile_low,
        config.lag_grid.quantile_high,
    )
    table = build_stir_table(joint, dep_h, dep_tau, grid)

    logger.info(
        f"Cluster {cluster} ({len(members)} stations): SLD {len(dep_h)} bins, "
        f"TLD {len(dep_tau)} bins, margins {margin_h.family}/{margin_tau.family}, "
        f"theta {copula.theta:.6f}, table {len(table)} rows"
    )
    return ClusterModel(cluster, tuple(members), dep_h, dep_tau, joint, grid, table)


def fit_margin(values: Sequence[float], margins: MarginsConfig, label: str) -> FittedMargin:
    """select_model over the configured candidates, or a point mass when
    the sample is too small or cannot be fitted."""
    values = np.asarray(values, dtype=float)
    if len(values) >= MIN_SELECT_SAMPLES:
        try:
            return select_model(values, margins.candidates, tuple(margins.blended_components))
        except (DataError, NumericError) as e:
            logger.warning(f"Margin {label}: {e}; using point-mass fallback")
    else:
        logger.warning(
            f"Margin {label}: {len(values)} values (< {MIN_SELECT_SAMPLES}); "
            f"using point-mass fallback"
        )
    return point_mass_margin(values)


def estimate_theta(dep_h: LagDependence, dep_tau: LagDependence, label: str) -> GhParam:
    """Kendall inversion on rank-paired SLD/TLD values; independence if impossible."""
    try:
        return fit_theta(paired_lag_values(dep_h, dep_tau))
    except InsufficientPairs as e:
        logger.warning(f"Copula {label}: {e}; using theta = 1 (independence)")
        return GhParam(1.0)


def predict_cell(
    fitted: FittedPipeline,
    lat: float,
    lon: float,
    t: int,
    mode: str = "literal",
    donors: int = 1,
) -> PointEstimate:
    """Interpolate one (location, time) from the imputed matrix."""
    return interpolate_point(
        fitted.matrix, fitted.assignment, fitted.tables(), (lat, lon), t, mode, donors
    )
