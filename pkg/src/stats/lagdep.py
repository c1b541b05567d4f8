"""Spatial and temporal influence ratios and their lag-dependence functions.

A spatial influence ratio compares two stations at the same time; a
temporal influence ratio compares one station at two times. Binning the
ratios and keeping the largest lag seen in each bin yields the lag
dependence the margins are fitted to.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import iqr

from ..data.models import ClusterAssignment, ObservationMatrix
from ..errors import DataError
from ..spatial.cluster import distance_matrix


logger = logging.getLogger(__name__)

DEFAULT_WIDTH_FLOOR = 0.05
ORIENTATIONS = ("index", "minmax")


class DegenerateCluster(DataError):
    """Cluster has fewer than two stations, so no spatial pair exists."""


@dataclass(frozen=True)
class LagRatioSample:
    """One influence ratio and the lag it was observed at.

    Attributes:
        ratio: Positive, finite, dimensionless
        lag: Meters (spatial) or bucket count (temporal), >= 0
    """

    ratio: float
    lag: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.ratio) and self.ratio > 0):
            raise ValueError(f"Ratio must be positive and finite, got {self.ratio}")
        if not self.lag >= 0:
            raise ValueError(f"Lag must be nonnegative, got {self.lag}")


@dataclass(frozen=True)
class LagDependence:
    """Maximum lag per ratio bin.

    Attributes:
        bins: (ratio-bin center, max lag) with strictly increasing centers
        bin_width: Width of every ratio bin
    """

    bins: Tuple[Tuple[float, float], ...]
    bin_width: float

    def __post_init__(self) -> None:
        if self.bin_width <= 0:
            raise ValueError(f"Bin width must be positive, got {self.bin_width}")
        centers = [c for c, _ in self.bins]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ValueError("Bin centers must be strictly increasing")
        if any(lag < 0 for _, lag in self.bins):
            raise ValueError("Max lags must be nonnegative")

    @property
    def centers(self) -> np.ndarray:
        return np.array([c for c, _ in self.bins])

    @property
    def max_lags(self) -> np.ndarray:
        return np.array([lag for _, lag in self.bins])

    def __len__(self) -> int:
        return len(self.bins)

    def lookup(self, ratio: float) -> Tuple[float, bool]:
        """Max lag of the bin holding `ratio`.

        Returns:
            (max lag, exact) where exact is False when the ratio's bin is
            unpopulated and the nearest populated bin (lower on ties) was used
        """
        key = _bin_key(ratio, self.bin_width)
        centers = self.centers
        distance = np.abs(centers - key * self.bin_width)
        nearest = int(np.argmin(distance))
        exact = bool(distance[nearest] <= 1e-9 * max(1.0, abs(centers[nearest])))
        return float(self.bins[nearest][1]), exact


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step function over sorted support points."""

    support: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.size == 0 or np.any(np.diff(probs) < 0) or probs[-1] != 1.0 or probs[0] < 0:
            raise ValueError("ECDF probabilities must be nondecreasing in [0, 1] and end at 1")

    def __call__(self, x: float) -> float:
        """P[X <= x]."""
        position = int(np.searchsorted(self.support, x, side="right"))
        return 0.0 if position == 0 else float(self.probabilities[position - 1])


def sir_samples(
    matrix: ObservationMatrix,
    assignment: ClusterAssignment,
    cluster: int,
    orientation: str = "index",
) -> List[LagRatioSample]:
    """Spatial ratios of every station pair in a cluster at every time.

    The lower-index station is the numerator ("index") or the larger value
    is ("minmax", ratios >= 1). Lag is the pair's great-circle distance.

    Raises:
        DegenerateCluster: If the cluster has fewer than two stations
        DataError: If the matrix is not fully observed
    """
    _require_full(matrix)
    _check_orientation(orientation)
    members = assignment.members(cluster)
    if len(members) < 2:
        raise DegenerateCluster(
            f"Cluster {cluster} has {len(members)} station(s); spatial ratios need a pair"
        )

    distances = distance_matrix([matrix.stations[i] for i in members]).meters
    samples: List[LagRatioSample] = []
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            ratios = _ratios(matrix.values[members[a]], matrix.values[members[b]], orientation)
            lag = float(distances[a, b])
            samples.extend(LagRatioSample(float(r), lag) for r in ratios)
    return samples


def tir_samples(
    matrix: ObservationMatrix,
    station: int,
    max_lag: int,
    orientation: str = "index",
) -> List[LagRatioSample]:
    """Temporal ratios earlier/later of one station for lags 1..max_lag.

    Samples are ordered by lag, then by the earlier time index.

    Raises:
        DataError: If the matrix is not fully observed
        ValueError: If max_lag < 1
    """
    _require_full(matrix)
    _check_orientation(orientation)
    if max_lag < 1:
        raise ValueError(f"max_lag must be at least 1, got {max_lag}")

    series = matrix.values[station]
    samples: List[LagRatioSample] = []
    for lag in range(1, min(max_lag, len(series) - 1) + 1):
        ratios = _ratios(series[:-lag], series[lag:], orientation)
        samples.extend(LagRatioSample(float(r), float(lag)) for r in ratios)
    return samples


def lag_dependence(samples: Sequence[LagRatioSample], bin_width: float) -> LagDependence:
    """Group ratios into bins of `bin_width` and keep each bin's maximum lag.

    A ratio r belongs to the bin centered at round(r / width) * width
    (halves round up, never below one width). Empty bins are omitted.

    Raises:
        DataError: If `samples` is empty
    """
    if not samples:
        raise DataError("Lag dependence needs at least one sample")
    if bin_width <= 0:
        raise ValueError(f"Bin width must be positive, got {bin_width}")

    maxima: Dict[int, float] = {}
    for sample in samples:
        key = _bin_key(sample.ratio, bin_width)
        maxima[key] = max(maxima.get(key, -math.inf), sample.lag)
    bins = tuple((key * bin_width, maxima[key]) for key in sorted(maxima))
    return LagDependence(bins=bins, bin_width=bin_width)


def ecdf(dep: LagDependence) -> EmpiricalCdf:
    """Empirical CDF of the bins' max-lag values, each bin weighted equally.

    Raises:
        DataError: If the dependence has no bins
    """
    if len(dep) == 0:
        raise DataError("ECDF needs a non-empty lag dependence")
    support, counts = np.unique(dep.max_lags, return_counts=True)
    probabilities = np.cumsum(counts) / counts.sum()
    probabilities[-1] = 1.0
    return EmpiricalCdf(support=support, probabilities=probabilities)


def freedman_diaconis_width(
    ratios: Iterable[float],
    floor: float = DEFAULT_WIDTH_FLOOR,
) -> float:
    """Bin width 2 * IQR * n^(-1/3), never below `floor`."""
    values = np.asarray(list(ratios), dtype=float)
    if values.size == 0:
        return floor
    width = 2.0 * float(iqr(values)) * values.size ** (-1.0 / 3.0)
    return max(width, floor)


def resolve_bin_width(samples: Sequence[LagRatioSample], bin_width) -> float:
    """Configured width, or the Freedman-Diaconis width of the sample ratios."""
    if bin_width is not None:
        return float(bin_width)
    return freedman_diaconis_width(s.ratio for s in samples)


def station_lag_dependences(
    matrix: ObservationMatrix,
    max_lag: int,
    bin_width=None,
    orientation: str = "index",
) -> Dict[str, LagDependence]:
    """Temporal lag dependence of every station on its own."""
    result: Dict[str, LagDependence] = {}
    for i, station in enumerate(matrix.stations):
        samples = tir_samples(matrix, i, max_lag, orientation)
        result[station.id] = lag_dependence(samples, resolve_bin_width(samples, bin_width))
    return result


def write_lag_dependence_csv(
    rows: Sequence[Tuple[str, str, LagDependence]],
    path: Union[str, Path],
) -> None:
    """Write (kind, scope, ratio_bin, max_lag) for every bin of every dependence.

    Args:
        rows: (kind, scope, dependence), e.g. ("spatial", "cluster:0", dep)
        path: Output CSV path
    """
    records = [
        (kind, scope, center, max_lag)
        for kind, scope, dep in rows
        for center, max_lag in dep.bins
    ]
    frame = pd.DataFrame(records, columns=["kind", "scope", "ratio_bin", "max_lag"])
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def _bin_key(ratio: float, width: float) -> int:
    # ratios below half a width join the first bin so centers stay positive
    return max(1, int(math.floor(ratio / width + 0.5)))


def _ratios(numerator: np.ndarray, denominator: np.ndarray, orientation: str) -> np.ndarray:
    if orientation == "minmax":
        return np.maximum(numerator, denominator) / np.minimum(numerator, denominator)
    return numerator / denominator


def _check_orientation(orientation: str) -> None:
    if orientation not in ORIENTATIONS:
        raise ValueError(f"Orientation must be one of {ORIENTATIONS}, got '{orientation}'")


def _require_full(matrix: ObservationMatrix) -> None:
    if not matrix.fully_observed:
        raise DataError("Influence ratios need a fully observed (imputed) matrix")
