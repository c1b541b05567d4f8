"""Most-likely-lag interpolation.

For every pair of ratio bins the joint lag density is maximized over the
lags both lag-dependence functions allow. The resulting table maps a
(spatial lag, temporal lag) back to a pair of influence ratios, which
scale a donor observation into the interpolated value.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Mapping, Sequence, Tuple, Union

import numpy as np

from ..data.models import ClusterAssignment, ObservationMatrix
from ..errors import DataError, NumericError
from ..spatial.cluster import haversine_to
from ..stats.copula import JointModel, joint_pdf
from ..stats.evd import FittedMargin
from ..stats.lagdep import LagDependence


logger = logging.getLogger(__name__)

CO_LOCATED_M = 1e-3
MODES = ("literal", "normalized")


class EmptyFeasibleRegion(NumericError):
    """No grid point satisfies both lag constraints."""


class EmptyTable(NumericError):
    """Every ratio-bin combination was infeasible."""


class NoDonor(DataError):
    """The query's cluster has no observed cell to scale from."""


@dataclass(frozen=True)
class LagGrid:
    """Search domain of the argmax.

    Attributes:
        h_values: Ascending spatial lags in meters
        tau_values: Ascending temporal lags in buckets
    """

    h_values: np.ndarray
    tau_values: np.ndarray

    def __post_init__(self) -> None:
        for name in ("h_values", "tau_values"):
            values = np.array(getattr(self, name), dtype=float)
            if values.ndim != 1 or values.size == 0:
                raise ValueError(f"{name} must be a non-empty vector")
            if np.any(np.diff(values) <= 0):
                raise ValueError(f"{name} must be strictly ascending")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def h_span(self) -> float:
        span = float(self.h_values[-1] - self.h_values[0])
        return span if span > 0 else 1.0

    @property
    def tau_span(self) -> float:
        span = float(self.tau_values[-1] - self.tau_values[0])
        return span if span > 0 else 1.0

    @classmethod
    def from_margins(
        cls,
        margin_h: FittedMargin,
        max_lag: int,
        h_steps: int = 200,
        quantile_low: float = 0.001,
        quantile_high: float = 0.999,
    ) -> "LagGrid":
        """h spans the spatial margin's quantile range; tau is 1..max_lag.

        Raises:
            NumericError: If the quantile range is empty or not finite
        """
        low = max(margin_h.ppf(quantile_low), 0.0)
        high = margin_h.ppf(quantile_high)
        if not (math.isfinite(low) and math.isfinite(high) and high > low):
            raise NumericError(
                f"Spatial margin quantiles give no usable lag range: [{low}, {high}]"
            )
        return cls(
            h_values=np.linspace(low, high, h_steps),
            tau_values=np.arange(1, max_lag + 1, dtype=float),
        )


@dataclass(frozen=True)
class StirRow:
    """Most likely lags of one ratio-bin pair."""

    r_h: float
    r_tau: float
    h_star: float
    tau_star: float
    density_at_max: float


@dataclass(frozen=True)
class StirTable:
    """Rows ordered by |ln r_h| + |ln r_tau| ascending, plus the grid spans
    used to normalize lag distances."""

    rows: Tuple[StirRow, ...]
    h_span: float
    tau_span: float
    omitted: int = 0

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class PointEstimate:
    """Interpolated value with the donor cell it was scaled from."""

    value: float
    donor_id: str
    donor_time: int
    r_h: float
    r_tau: float


@dataclass(frozen=True)
class InterpolationGrid:
    """Raster of interpolated values.

    Attributes:
        bbox: (min_lon, min_lat, max_lon, max_lat) in degrees
        cell_deg: Cell edge in degrees
        times: Requested time indices, one layer each
        lons: Cell-center longitudes (columns)
        lats: Cell-center latitudes (rows)
        values: (layers, rows, columns); NaN where no donor existed
        donor_ids: Same shape; "" where no donor existed
    """

    bbox: Tuple[float, float, float, float]
    cell_deg: float
    times: Tuple[int, ...]
    lons: np.ndarray
    lats: np.ndarray
    values: np.ndarray
    donor_ids: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.values.size)


Tables = Union[StirTable, Mapping[int, StirTable]]


def lag_density_grid(m: JointModel, grid: LagGrid) -> np.ndarray:
    """joint_pdf on every (h, tau) grid point, shape (len(h), len(tau)).

    Non-finite densities become -inf so they never win the argmax.
    """
    h, tau = np.meshgrid(grid.h_values, grid.tau_values, indexing="ij")
    density = np.asarray(joint_pdf(m, h, tau), dtype=float)
    return np.where(np.isfinite(density), density, -np.inf)


def most_likely_lag(
    m: JointModel,
    dep_h: LagDependence,
    dep_tau: LagDependence,
    stir: Tuple[float, float],
    grid: LagGrid,
) -> Tuple[float, float]:
    """argmax of the joint density over h <= SLD(r_h), tau <= TLD(r_tau).

    Ties go to the smaller h, then the smaller tau.

    Raises:
        EmptyFeasibleRegion: If a constraint excludes every grid point
    """
    r_h, r_tau = stir
    h_limit, exact_h = dep_h.lookup(r_h)
    tau_limit, exact_tau = dep_tau.lookup(r_tau)
    if not (exact_h and exact_tau):
        logger.debug(f"Ratio pair ({r_h}, {r_tau}) outside populated bins; nearest bin used")
    i, j, _ = _constrained_argmax(lag_density_grid(m, grid), grid, h_limit, tau_limit)
    return float(grid.h_values[i]), float(grid.tau_values[j])


def build_stir_table(
    m: JointModel,
    dep_h: LagDependence,
    dep_tau: LagDependence,
    grid: LagGrid,
) -> StirTable:
    """One row per (spatial bin, temporal bin) with a feasible argmax.

    Raises:
        EmptyTable: If every combination is infeasible
    """
    density = lag_density_grid(m, grid)
    rows: List[StirRow] = []
    omitted = 0
    for r_h, h_limit in dep_h.bins:
        for r_tau, tau_limit in dep_tau.bins:
            try:
                i, j, best = _constrained_argmax(density, grid, h_limit, tau_limit)
            except EmptyFeasibleRegion:
                omitted += 1
                continue
            rows.append(
                StirRow(
                    r_h=float(r_h),
                    r_tau=float(r_tau),
                    h_star=float(grid.h_values[i]),
                    tau_star=float(grid.tau_values[j]),
                    density_at_max=float(best),
                )
            )

    if not rows:
        raise EmptyTable(f"All {omitted} ratio-bin combinations were infeasible")
    if omitted:
        logger.info(f"STIR table: {omitted} infeasible ratio-bin combinations omitted")

    rows.sort(key=lambda row: _extremeness(row.r_h) + _extremeness(row.r_tau))
    return StirTable(rows=tuple(rows), h_span=grid.h_span, tau_span=grid.tau_span, omitted=omitted)


def a_map(table: StirTable, h: float, tau: float) -> Tuple[float, float]:
    """Ratios of the row whose (h*, tau*) is nearest to (h, tau).

    Each axis is divided by its grid span; the first row wins ties.
    """
    if not table.rows:
        raise EmptyTable("a_map needs a non-empty table")
    h_star = np.array([row.h_star for row in table.rows])
    tau_star = np.array([row.tau_star for row in table.rows])
    distance = ((h_star - h) / table.h_span) ** 2 + ((tau_star - tau) / table.tau_span) ** 2
    row = table.rows[int(np.argmin(distance))]
    return row.r_h, row.r_tau


def interpolate_point(
    matrix: ObservationMatrix,
    assignment: ClusterAssignment,
    table: Tables,
    s0: Tuple[float, float],
    t0: int,
    mode: str = "literal",
    donors: int = 1,
) -> PointEstimate:
    """Scale the nearest observed cell of the query's cluster by its ratios.

    The cluster is that of the nearest station. With (r_h, r_tau) from
    a_map at the donor's lags, literal mode returns z * sqrt(r_h^2 + r_tau^2)
    and normalized mode divides that by sqrt(2). At zero lag a ratio is 1:
    r_h when the donor is co-located (< 1 mm), r_tau when tau = 0.
    With donors > 1 the per-donor values are averaged with inverse-distance
    weights; the reported donor is the nearest.

    Args:
        matrix: Observations supplying donors (only observed cells donate)
        assignment: Clusters of matrix stations
        table: STIR table, or one table per cluster index
        s0: Query (lat, lon) in degrees
        t0: Query time index
        mode: literal or normalized
        donors: Number of donors k

    Raises:
        NoDonor: If the cluster has no observed cell
    """
    if mode not in MODES:
        raise ValueError(f"Mode must be one of {MODES}, got '{mode}'")
    if not 0 <= t0 < matrix.n_times:
        raise ValueError(f"Time index {t0} outside [0, {matrix.n_times})")

    lat, lon = s0
    distances = haversine_to(lat, lon, matrix.stations)
    cluster = assignment.labels[int(np.argmin(distances))]
    cluster_table = _table_for(table, cluster)
    members = assignment.members(cluster)

    candidates = [
        (i, j) for i in members for j in range(matrix.n_times) if matrix.observed[i, j]
    ]
    if not candidates:
        raise NoDonor(f"Cluster {cluster} has no observed cell near ({lat}, {lon}, {t0})")

    spatial = np.array([distances[i] for i, _ in candidates])
    temporal = np.array([abs(j - t0) for _, j in candidates], dtype=float)
    scaled = np.hypot(spatial / cluster_table.h_span, temporal / cluster_table.tau_span)
    order = np.argsort(scaled, kind="stable")[:max(1, donors)]

    estimates = [
        _scale_donor(matrix, cluster_table, candidates[k], spatial[k], temporal[k], mode)
        for k in order
    ]
    nearest = estimates[0]
    if len(estimates) == 1 or scaled[order[0]] == 0.0:
        return nearest

    weights = 1.0 / scaled[order]
    value = float(np.dot(weights, [e.value for e in estimates]) / weights.sum())
    return PointEstimate(value, nearest.donor_id, nearest.donor_time, nearest.r_h, nearest.r_tau)


def interpolate_grid(
    matrix: ObservationMatrix,
    assignment: ClusterAssignment,
    table: Tables,
    bbox: Tuple[float, float, float, float],
    cell_deg: float,
    times: Sequence[int],
    mode: str = "literal",
    donors: int = 1,
    threads: int = 1,
) -> InterpolationGrid:
    """interpolate_point at every cell center of every requested layer.

    Cells without a donor hold NaN and an empty donor id. Layers run
    concurrently and are assembled in request order.
    """
    min_lon, min_lat, max_lon, max_lat = bbox
    lons = _cell_centers(min_lon, max_lon, cell_deg)
    lats = _cell_centers(min_lat, max_lat, cell_deg)
    _check_overlap(matrix, bbox)

    def layer(t: int) -> Tuple[np.ndarray, np.ndarray]:
        values = np.full((lats.size, lons.size), np.nan)
        ids = np.full((lats.size, lons.size), "", dtype=object)
        for r, lat in enumerate(lats):
            for c, lon in enumerate(lons):
                try:
                    estimate = interpolate_point(
                        matrix, assignment, table, (float(lat), float(lon)), t, mode, donors
                    )
                except NoDonor:
                    continue
                values[r, c] = estimate.value
                ids[r, c] = estimate.donor_id
        return values, ids

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        layers = list(pool.map(layer, list(times)))

    shape = (len(layers), lats.size, lons.size)
    values = np.stack([v for v, _ in layers]) if layers else np.empty(shape)
    ids = np.stack([i for _, i in layers]) if layers else np.empty(shape, dtype=object)
    missing = int(np.isnan(values).sum())
    if missing:
        logger.warning(f"{missing} grid cells had no donor")
    logger.info(
        f"Interpolated {values.size} cells ({len(layers)} layers of {lats.size} x {lons.size})"
    )
    return InterpolationGrid(
        bbox=tuple(float(v) for v in bbox),
        cell_deg=float(cell_deg),
        times=tuple(int(t) for t in times),
        lons=lons,
        lats=lats,
        values=values,
        donor_ids=ids,
    )


def default_bbox(matrix: ObservationMatrix, cell_deg: float) -> Tuple[float, float, float, float]:
    """Station extent padded by one cell on every side."""
    lats = [s.lat for s in matrix.stations]
    lons = [s.lon for s in matrix.stations]
    return (
        min(lons) - cell_deg,
        min(lats) - cell_deg,
        max(lons) + cell_deg,
        max(lats) + cell_deg,
    )


def _constrained_argmax(
    density: np.ndarray,
    grid: LagGrid,
    h_limit: float,
    tau_limit: float,
) -> Tuple[int, int, float]:
    """Grids are ascending, so the feasible set is a leading sub-block;
    argmax over it in h-major order gives the smaller-h, smaller-tau tie-break."""
    n_h = int(np.searchsorted(grid.h_values, h_limit, side="right"))
    n_tau = int(np.searchsorted(grid.tau_values, tau_limit, side="right"))
    if n_h == 0 or n_tau == 0:
        raise EmptyFeasibleRegion(
            f"No grid point with h <= {h_limit} and tau <= {tau_limit}"
        )
    block = density[:n_h, :n_tau]
    flat = int(np.argmax(block))
    i, j = divmod(flat, n_tau)
    return i, j, float(block[i, j])


def _extremeness(ratio: float) -> float:
    return abs(math.log(ratio)) if ratio > 0 else math.inf


def _scale_donor(
    matrix: ObservationMatrix,
    table: StirTable,
    cell: Tuple[int, int],
    spatial: float,
    temporal: float,
    mode: str,
) -> PointEstimate:
    i, j = cell
    r_h, r_tau = a_map(table, spatial, temporal)
    if spatial < CO_LOCATED_M:
        r_h = 1.0
    if temporal == 0.0:
        r_tau = 1.0
    factor = math.sqrt(r_h * r_h + r_tau * r_tau)
    if mode == "normalized":
        factor /= math.sqrt(2.0)
    value = float(matrix.values[i, j]) * factor
    return PointEstimate(value, matrix.stations[i].id, j, r_h, r_tau)


def _table_for(table: Tables, cluster: int) -> StirTable:
    if isinstance(table, StirTable):
        return table
    return table[cluster]


def _cell_centers(low: float, high: float, cell: float) -> np.ndarray:
    count = max(1, int(math.ceil((high - low) / cell - 1e-9)))
    return low + (np.arange(count) + 0.5) * cell


def _check_overlap(matrix: ObservationMatrix, bbox: Tuple[float, float, float, float]) -> None:
    min_lon, min_lat, max_lon, max_lat = bbox
    lats = [s.lat for s in matrix.stations]
    lons = [s.lon for s in matrix.stations]
    if max_lon < min(lons) or min_lon > max(lons) or max_lat < min(lats) or min_lat > max(lats):
        logger.warning(f"Bounding box {list(bbox)} does not overlap the station extent")
