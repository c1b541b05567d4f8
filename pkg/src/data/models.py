"""Domain types shared by every pipeline stage.

Stations, the temporal axis, the observation matrix with its explicit
missing-value mask, and cluster assignments. All types are immutable
after construction; numpy payloads are flagged read-only.
"""

import math
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


# last day present in every calendar month
MAX_MONTHLY_START_DAY = 28


class Granularity(Enum):
    """Temporal bucket size."""

    ONE_MONTH = "1m"
    TWO_MONTHS = "2m"
    THREE_MONTHS = "3m"
    CUSTOM = "custom"

    @property
    def months(self) -> Optional[int]:
        """Bucket length in calendar months (None for custom day buckets)."""
        return {"1m": 1, "2m": 2, "3m": 3}.get(self.value)


def parse_granularity(token: str) -> Tuple[Granularity, Optional[int]]:
    """Parse '1m', '2m', '3m' or '<N>d' into (granularity, custom_days).

    Raises:
        ValueError: If the token is not recognised
    """
    token = token.strip().lower()
    for granularity in (Granularity.ONE_MONTH, Granularity.TWO_MONTHS, Granularity.THREE_MONTHS):
        if token == granularity.value:
            return granularity, None
    if token.endswith("d") and token[:-1].isdigit() and int(token[:-1]) > 0:
        return Granularity.CUSTOM, int(token[:-1])
    raise ValueError(f"Unknown granularity: '{token}'")


@dataclass(frozen=True)
class Station:
    """Monitoring station.

    Attributes:
        id: Station identifier, unique within a dataset
        lat: Latitude in degrees [-90, 90]
        lon: Longitude in degrees [-180, 180]
    """

    id: str
    lat: float
    lon: float

    def __post_init__(self) -> None:
        """Validate identifier and coordinates."""
        if not self.id:
            raise ValueError("Station id is required")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"Latitude out of range for {self.id}: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"Longitude out of range for {self.id}: {self.lon}")


@dataclass(frozen=True)
class TimeAxis:
    """Temporal sample space of k equally sized buckets.

    Attributes:
        start: First day of the first bucket
        granularity: Bucket size
        count: Number of buckets k (>= 2)
        custom_days: Bucket length in days when granularity is CUSTOM
    """

    start: date
    granularity: Granularity
    count: int
    custom_days: Optional[int] = None

    def __post_init__(self) -> None:
        """Validate bucket count and custom length."""
        if self.count < 2:
            raise ValueError(f"Time axis needs at least 2 buckets, got {self.count}")
        if self.granularity is Granularity.CUSTOM:
            if self.custom_days is None or self.custom_days < 1:
                raise ValueError("Custom granularity needs a positive day count")
        elif self.start.day > MAX_MONTHLY_START_DAY:
            raise ValueError(
                f"Monthly buckets must start on day 1-{MAX_MONTHLY_START_DAY}, got {self.start}"
            )

    def bucket_index(self, when: date) -> int:
        """Return the bucket index of a calendar date (may fall outside [0, count))."""
        if self.granularity is Granularity.CUSTOM:
            return (when - self.start).days // self.custom_days
        months = (when.year - self.start.year) * 12 + (when.month - self.start.month)
        if when.day < self.start.day:
            months -= 1
        return months // self.granularity.months

    def bucket_start(self, index: int) -> date:
        """Return the first day of bucket `index`."""
        if self.granularity is Granularity.CUSTOM:
            return self.start + timedelta(days=index * self.custom_days)
        total = self.start.month - 1 + index * self.granularity.months
        year = self.start.year + total // 12
        month = total % 12 + 1
        return self.start.replace(year=year, month=month)

    def labels(self) -> List[str]:
        """ISO start dates of every bucket."""
        return [self.bucket_start(j).isoformat() for j in range(self.count)]


@dataclass(frozen=True)
class ObservationMatrix:
    """n stations x k time buckets of a positive field with a missing mask.

    Attributes:
        stations: Ordered stations (length n); order defines station index
        time_axis: Temporal axis (length k)
        values: n x k array; NaN wherever the cell is missing
        observed: n x k boolean mask, True where the cell holds a value
    """

    stations: Tuple[Station, ...]
    time_axis: TimeAxis
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        """Freeze the numpy payloads."""
        values = np.array(self.values, dtype=float)
        observed = np.array(self.observed, dtype=bool)
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def from_values(
        cls,
        stations: List[Station],
        time_axis: TimeAxis,
        values: np.ndarray,
    ) -> "ObservationMatrix":
        """Build a matrix whose mask is derived from the NaN cells of `values`."""
        array = np.asarray(values, dtype=float)
        return cls(tuple(stations), time_axis, array, np.isfinite(array))

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_times(self) -> int:
        return self.time_axis.count

    @property
    def station_ids(self) -> List[str]:
        return [s.id for s in self.stations]

    @property
    def fully_observed(self) -> bool:
        return bool(self.observed.all())

    def station_index(self, station_id: str) -> int:
        """Index of a station by id.

        Raises:
            KeyError: If the id is not in the matrix
        """
        for i, station in enumerate(self.stations):
            if station.id == station_id:
                return i
        raise KeyError(station_id)

    def with_values(self, values: np.ndarray, observed: np.ndarray) -> "ObservationMatrix":
        """Copy of this matrix with replaced payloads (same stations and axis)."""
        return ObservationMatrix(self.stations, self.time_axis, values, observed)

    def without_station(self, index: int) -> "ObservationMatrix":
        """Copy of this matrix with one station row removed."""
        keep = [i for i in range(self.n_stations) if i != index]
        return ObservationMatrix(
            tuple(self.stations[i] for i in keep),
            self.time_axis,
            self.values[keep],
            self.observed[keep],
        )


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of stations into radius-bounded clusters.

    Attributes:
        labels: Cluster index per station (length n)
        radius_m: Radius bound in meters
        representatives: Station index of each cluster's medoid
    """

    labels: Tuple[int, ...]
    radius_m: float
    representatives: Tuple[int, ...]

    @property
    def n_clusters(self) -> int:
        return len(self.representatives)

    def members(self, cluster: int) -> List[int]:
        """Station indices belonging to a cluster, in station order."""
        return [i for i, label in enumerate(self.labels) if label == cluster]


def validate(matrix: ObservationMatrix) -> List[str]:
    """Check every ObservationMatrix invariant.

    Reports violations, never raises.

    Returns:
        Empty list iff all invariants hold; otherwise one description per
        violation naming the offending cell or field
    """
    violations: List[str] = []
    n, k = matrix.n_stations, matrix.n_times

    if matrix.values.shape != (n, k):
        violations.append(f"values shape {matrix.values.shape} != ({n}, {k})")
    if matrix.observed.shape != (n, k):
        violations.append(f"mask shape {matrix.observed.shape} != ({n}, {k})")
    if violations:
        return violations

    seen = set()
    for station in matrix.stations:
        if station.id in seen:
            violations.append(f"duplicate station id '{station.id}'")
        seen.add(station.id)

    for i, j in zip(*np.nonzero(matrix.observed)):
        value = matrix.values[i, j]
        if not math.isfinite(value) or value <= 0:
            violations.append(
                f"cell ({matrix.stations[i].id}, {j}) observed with non-positive "
                f"or non-finite value {value}"
            )
    for i, j in zip(*np.nonzero(~matrix.observed)):
        if not math.isnan(matrix.values[i, j]):
            violations.append(f"cell ({matrix.stations[i].id}, {j}) missing but holds a value")

    return violations
