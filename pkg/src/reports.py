"""Human-readable and tabular reports of fitted models and scores.

Reports are stage artifacts, so they carry no timestamps and every
number is written with fixed decimals.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

from .data.models import ClusterAssignment, Station
from .evaluation.metrics import MetricReport
from .pipeline import ClusterModel
from .stats.evd import PARAM_NAMES, EvdFamily, FittedMargin, ks_distance
from .stats.lagdep import ecdf
from .utils.formatting import format_distance, format_fixed, format_params


MARGIN_COLUMNS = [
    "scope", "margin", "family", "params", "log_likelihood", "aic", "n_samples", "ks",
]


@dataclass(frozen=True)
class MarginSummary:
    """One fitted margin and its distance to the ECDF it was fitted to."""

    scope: str
    margin: str
    fitted: FittedMargin
    ks: float


def summarize_margins(models: Dict[int, ClusterModel]) -> List[MarginSummary]:
    """Spatial and temporal margin of every cluster; a shared pooled model is listed once."""
    rows: List[MarginSummary] = []
    pooled_listed = False
    for cluster, model in sorted(models.items()):
        if model.pooled:
            if pooled_listed:
                continue
            pooled_listed = True
            scope = "pooled"
        else:
            scope = f"cluster:{cluster}"
        for name, fitted, dep in (
            ("spatial", model.joint.margin_h, model.dep_h),
            ("temporal", model.joint.margin_tau, model.dep_tau),
        ):
            rows.append(MarginSummary(scope, name, fitted, ks_distance(fitted, ecdf(dep))))
    return rows


def format_margin_params(fitted: FittedMargin) -> str:
    """"name=value; ..." for a single family, the full description for a blend."""
    if isinstance(fitted.model, EvdFamily):
        return format_params(PARAM_NAMES[fitted.model.tag], fitted.model.params)
    return fitted.describe()


def build_margin_report(rows: Sequence[MarginSummary]) -> str:
    """Build the margin section of the model report.

    Args:
        rows: Margin summaries from summarize_margins

    Returns:
        One block per margin
    """
    lines: List[str] = []
    for row in rows:
        fitted = row.fitted
        lines.append(f"{row.scope} {row.margin} margin: {fitted.family}")
        lines.append(f"  Params: {format_margin_params(fitted)}")
        lines.append(
            f"  Log-likelihood: {format_fixed(fitted.log_likelihood)} | "
            f"AIC: {format_fixed(fitted.aic)} | n: {fitted.n_samples} | "
            f"KS: {format_fixed(row.ks)}"
        )
        for warning in fitted.warnings:
            lines.append(f"  Warning: {warning}")
    return "\n".join(lines)


def build_model_report(
    models: Dict[int, ClusterModel],
    assignment: ClusterAssignment,
    stations: Sequence[Station],
) -> str:
    """Build the full model report: clusters, copulas, tables, then margins."""
    lines = [
        f"Clusters: {assignment.n_clusters} (radius {format_distance(assignment.radius_m)})",
        "",
    ]
    for cluster, model in sorted(models.items()):
        members = ", ".join(stations[i].id for i in assignment.members(cluster))
        medoid = stations[assignment.representatives[cluster]].id
        source = " (pooled model)" if model.pooled else ""
        copula = model.joint.copula
        table = model.table
        lines.extend(
            [
                f"Cluster {cluster}{source}: {members} | medoid {medoid}",
                f"  SLD bins: {len(model.dep_h)} | TLD bins: {len(model.dep_tau)}",
                f"  Copula: theta={format_fixed(copula.theta)}; "
                f"kendall_tau={format_fixed(copula.kendall_tau)}",
                f"  STIR table: {len(table)} rows, {table.omitted} omitted | "
                f"h span {format_distance(table.h_span)} | "
                f"tau span {format_fixed(table.tau_span)} buckets",
                "",
            ]
        )
    lines.append(build_margin_report(summarize_margins(models)))
    return "\n".join(lines) + "\n"


def build_metric_report(title: str, report: MetricReport) -> str:
    """Build a metric summary with the per-cluster breakdown.

    Args:
        title: Protocol name, e.g. "holdout"
        report: Scores to summarize

    Returns:
        "<title>: RMSE .. | MAE .. | n ..", then one indented line per cluster
    """
    lines = [
        f"{title}: RMSE {format_fixed(report.rmse)} | "
        f"MAE {format_fixed(report.mae)} | n {report.n}"
    ]
    for cluster, m in sorted(report.per_cluster.items()):
        lines.append(
            f"  cluster {cluster}: RMSE {format_fixed(m.rmse)} | "
            f"MAE {format_fixed(m.mae)} | n {m.n}"
        )
    return "\n".join(lines) + "\n"


def write_margin_report_csv(rows: Sequence[MarginSummary], path: Union[str, Path]) -> None:
    """Write one row per margin with parameters, fit quality and KS distance."""
    frame = pd.DataFrame(
        [
            (
                r.scope,
                r.margin,
                r.fitted.family,
                format_margin_params(r.fitted),
                r.fitted.log_likelihood,
                r.fitted.aic,
                r.fitted.n_samples,
                r.ks,
            )
            for r in rows
        ],
        columns=MARGIN_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
