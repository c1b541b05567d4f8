"""Accuracy metrics in original field units."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import DataError


class LengthMismatch(DataError):
    """Prediction and truth vectors differ in length."""


class Empty(DataError):
    """Nothing to score."""


@dataclass(frozen=True)
class ClusterMetrics:
    """Scores of the cells belonging to one cluster."""

    rmse: float
    mae: float
    n: int


@dataclass(frozen=True)
class MetricReport:
    """RMSE/MAE over all scored cells with a per-cluster breakdown.

    Attributes:
        rmse: Root mean square error
        mae: Mean absolute error
        n: Number of scored cells
        per_cluster: Cluster index -> metrics of that cluster's cells
    """

    rmse: float
    mae: float
    n: int
    per_cluster: Dict[int, ClusterMetrics] = field(default_factory=dict)

    @classmethod
    def from_predictions(
        cls,
        predictions: Sequence[float],
        truths: Sequence[float],
        clusters: Sequence[int],
    ) -> "MetricReport":
        """Score aligned predictions and group them by cluster index."""
        pred = np.asarray(predictions, dtype=float)
        truth = np.asarray(truths, dtype=float)
        labels = np.asarray(clusters, dtype=int)
        per_cluster = {}
        for cluster in sorted(set(labels.tolist())):
            sel = labels == cluster
            per_cluster[cluster] = ClusterMetrics(
                rmse(pred[sel], truth[sel]), mae(pred[sel], truth[sel]), int(sel.sum())
            )
        return cls(rmse(pred, truth), mae(pred, truth), len(pred), per_cluster)


def rmse(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Root mean square error.

    Raises:
        LengthMismatch: If the vectors differ in length
        Empty: If the vectors are empty
    """
    diff = _difference(pred, truth)
    return math.sqrt(math.fsum(diff * diff) / diff.size)


def mae(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Mean absolute error.

    Raises:
        LengthMismatch: If the vectors differ in length
        Empty: If the vectors are empty
    """
    diff = _difference(pred, truth)
    return math.fsum(np.abs(diff)) / diff.size


def write_metric_report(report: MetricReport, path: Union[str, Path]) -> None:
    """Write the overall row (cluster 'all') followed by one row per cluster."""
    rows = [("all", report.rmse, report.mae, report.n)]
    rows.extend(
        (str(cluster), m.rmse, m.mae, m.n) for cluster, m in sorted(report.per_cluster.items())
    )
    frame = pd.DataFrame(rows, columns=["cluster", "rmse", "mae", "n"])
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def _difference(pred: Sequence[float], truth: Sequence[float]) -> np.ndarray:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size != t.size:
        raise LengthMismatch(f"Prediction length {p.size} != truth length {t.size}")
    if p.size == 0:
        raise Empty("Cannot score empty vectors")
    return p - t
