"""Radius-bounded hierarchical spatial clustering of stations.

Complete-linkage agglomeration on great-circle distances, cut at a
diameter of 2 x radius, followed by medoid splitting so that every
station also lies within radius of its cluster representative.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from ..data.models import ClusterAssignment, Station


logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric n x n great-circle distances in meters."""

    meters: np.ndarray

    def __post_init__(self) -> None:
        array = np.array(self.meters, dtype=float)
        array.setflags(write=False)
        object.__setattr__(self, "meters", array)

    def spot_check_triangle(self, rng: np.random.Generator, samples: int = 100) -> bool:
        """Check the triangle inequality on randomly drawn triples."""
        n = self.meters.shape[0]
        if n < 3:
            return True
        triples = rng.integers(0, n, size=(samples, 3))
        d = self.meters
        a, b, c = triples[:, 0], triples[:, 1], triples[:, 2]
        return bool(np.all(d[a, c] <= d[a, b] + d[b, c] + 1e-6))


def haversine(a: Station, b: Station) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    return float(
        _haversine_arrays(
            np.array([a.lat]), np.array([a.lon]), np.array([b.lat]), np.array([b.lon])
        )[0]
    )


def haversine_to(lat: float, lon: float, stations: Sequence[Station]) -> np.ndarray:
    """Distances in meters from a point to every station."""
    lats = np.array([s.lat for s in stations])
    lons = np.array([s.lon for s in stations])
    return _haversine_arrays(np.full_like(lats, lat), np.full_like(lons, lon), lats, lons)


def distance_matrix(stations: Sequence[Station]) -> DistanceMatrix:
    """Pairwise great-circle distances with an exact zero diagonal."""
    lats = np.array([s.lat for s in stations])
    lons = np.array([s.lon for s in stations])
    meters = _haversine_arrays(lats[:, None], lons[:, None], lats[None, :], lons[None, :])
    meters = np.maximum(meters, meters.T)
    np.fill_diagonal(meters, 0.0)
    return DistanceMatrix(meters)


def hsc(
    stations: Sequence[Station],
    radius_m: float,
    method: str = "complete",
) -> ClusterAssignment:
    """Cluster stations so that every cluster's diameter is <= 2 x radius_m
    and every member lies within radius_m of the cluster medoid.

    Labels are renumbered in order of first appearance, so cluster 0
    always contains station 0.

    Args:
        stations: Stations in matrix order (n >= 1)
        radius_m: Radius bound in meters (> 0, may be inf)
        method: "complete" (default) or "single" linkage

    Returns:
        ClusterAssignment with medoid representatives
    """
    if not stations:
        raise ValueError("At least one station is required")
    if radius_m <= 0:
        raise ValueError(f"Radius must be positive, got {radius_m}")

    distances = distance_matrix(stations).meters
    groups = _cut(list(range(len(stations))), distances, 2.0 * radius_m, method)

    final: List[List[int]] = []
    for group in groups:
        final.extend(_split_until_medoid_bound(group, distances, radius_m, method))

    final.sort(key=min)
    labels = [0] * len(stations)
    representatives = []
    for cluster_index, group in enumerate(final):
        for i in group:
            labels[i] = cluster_index
        representatives.append(_medoid(group, distances))

    assignment = ClusterAssignment(
        labels=tuple(labels), radius_m=float(radius_m), representatives=tuple(representatives)
    )
    logger.info(
        f"Clustered {len(stations)} stations into {assignment.n_clusters} clusters "
        f"(radius {radius_m:.0f} m, {method} linkage)"
    )
    return assignment


def write_assignment_csv(
    assignment: ClusterAssignment,
    stations: Sequence[Station],
    path: Union[str, Path],
) -> None:
    """Export columns station_id, cluster_index, representative_id."""
    frame = pd.DataFrame(
        {
            "station_id": [s.id for s in stations],
            "cluster_index": list(assignment.labels),
            "representative_id": [
                stations[assignment.representatives[label]].id for label in assignment.labels
            ],
        }
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def read_assignment_csv(
    path: Union[str, Path],
    stations: Sequence[Station],
    radius_m: float,
) -> ClusterAssignment:
    """Read a cluster export back against the matrix station order."""
    frame = pd.read_csv(path, dtype={"station_id": str, "representative_id": str})
    by_id = {row.station_id: row for row in frame.itertuples(index=False)}
    index = {s.id: i for i, s in enumerate(stations)}
    labels = tuple(int(by_id[s.id].cluster_index) for s in stations)
    n_clusters = max(labels) + 1
    representatives = [0] * n_clusters
    for s in stations:
        row = by_id[s.id]
        representatives[int(row.cluster_index)] = index[row.representative_id]
    return ClusterAssignment(
        labels=labels, radius_m=radius_m, representatives=tuple(representatives)
    )


def _haversine_arrays(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised haversine formula in meters."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _cut(
    members: List[int],
    distances: np.ndarray,
    threshold: float,
    method: str,
) -> List[List[int]]:
    """Agglomerate `members` and cut the dendrogram at `threshold`."""
    if len(members) == 1:
        return [members]
    sub = distances[np.ix_(members, members)]
    tree = linkage(squareform(sub, checks=False), method=method)
    if math.isinf(threshold):
        flat = np.ones(len(members), dtype=int)
    else:
        flat = fcluster(tree, t=threshold, criterion="distance")
    groups: dict = {}
    for member, label in zip(members, flat):
        groups.setdefault(int(label), []).append(member)
    return sorted(groups.values(), key=min)


def _split_until_medoid_bound(
    group: List[int],
    distances: np.ndarray,
    radius_m: float,
    method: str,
) -> List[List[int]]:
    """Split a cluster in two along its dendrogram until the medoid rule holds."""
    medoid = _medoid(group, distances)
    if max(distances[medoid, i] for i in group) <= radius_m:
        return [group]

    sub = distances[np.ix_(group, group)]
    tree = linkage(squareform(sub, checks=False), method=method)
    flat = fcluster(tree, t=2, criterion="maxclust")
    halves: dict = {}
    for member, label in zip(group, flat):
        halves.setdefault(int(label), []).append(member)
    if len(halves) < 2:
        halves = _split_at_farthest_pair(group, distances)

    result: List[List[int]] = []
    for half in sorted(halves.values(), key=min):
        result.extend(_split_until_medoid_bound(half, distances, radius_m, method))
    return result


def _split_at_farthest_pair(group: List[int], distances: np.ndarray) -> dict:
    """Two-way split around the farthest pair; used when merge heights tie."""
    sub = distances[np.ix_(group, group)]
    a, b = np.unravel_index(int(np.argmax(sub)), sub.shape)
    halves: dict = {0: [], 1: []}
    for k, member in enumerate(group):
        halves[0 if sub[k, a] <= sub[k, b] else 1].append(member)
    return halves


def _medoid(group: List[int], distances: np.ndarray) -> int:
    """Member minimizing the maximum distance to the other members (lowest index on ties)."""
    sub = distances[np.ix_(group, group)]
    return group[int(np.argmin(sub.max(axis=1)))]
