"""Command-line front end.

Each subcommand runs one stage, reads its inputs from the previous
stage's artifacts in the output directory and writes its own artifacts
plus a manifest_<stage>.json. `all` runs every stage in order.
"""

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .data.ingest import (
    infer_time_axis,
    load_stations,
    parse_csv,
    read_matrix_csv,
    resample,
    write_matrix_csv,
)
from .data.models import ClusterAssignment, ObservationMatrix, Station, parse_granularity
from .errors import ConfigError, DataError, NumericError, PipelineError, StageDependencyError
from .evaluation.metrics import MetricReport, write_metric_report
from .evaluation.validation import MIN_LOSO_STATIONS, holdout_eval, loso_eval
from .gapfill.blstm import InsufficientData, save_model
from .gapfill.impute import evaluate_split, impute_with_report, write_imputation_report
from .interpolation.export import (
    read_stir_tables_csv,
    write_grid_csv,
    write_grid_geojson,
    write_stir_tables_csv,
)
from .interpolation.interpolator import default_bbox, interpolate_grid
from .logger import log_banner, setup_logger
from .pipeline import ClusterModel, fit_cluster_models
from .reports import (
    build_metric_report,
    build_model_report,
    summarize_margins,
    write_margin_report_csv,
)
from .spatial.cluster import hsc, read_assignment_csv, write_assignment_csv
from .stats.lagdep import station_lag_dependences, write_lag_dependence_csv
from .utils.formatting import format_duration
from .utils.timezone import get_timestamp_string


logger = logging.getLogger(__name__)

STAGES = ("ingest", "cluster", "gapfill", "fit", "interpolate", "evaluate")

ARTIFACTS: Dict[str, Tuple[str, ...]] = {
    "ingest": ("matrix.csv",),
    "cluster": ("clusters.csv",),
    "gapfill": ("imputed.csv", "imputation_report.csv"),
    "fit": ("lagdep.csv", "margins.csv", "model_report.txt", "stir_tables.csv"),
    "interpolate": ("grid.csv", "grid.geojson"),
    "evaluate": ("metrics.csv", "metrics.txt"),
}

# Nearest prerequisite first, so the error names the stage that was skipped last
REQUIRES: Dict[str, Tuple[str, ...]] = {
    "ingest": (),
    "cluster": ("ingest",),
    "gapfill": ("cluster", "ingest"),
    "fit": ("gapfill", "cluster", "ingest"),
    "interpolate": ("fit", "gapfill", "cluster", "ingest"),
    "evaluate": ("gapfill", "cluster", "ingest"),
}

VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "PyYAML")


class StageRunner:
    """Runs pipeline stages against one output directory.

    Stages communicate only through files, so any stage can be rerun on
    its own once its prerequisites exist.
    """

    def __init__(self, config: PipelineConfig):
        """Initialize the runner.

        Args:
            config: Validated pipeline configuration
        """
        self._config = config
        self._out = Path(config.paths.output_dir)
        self._granularity, self._custom_days = parse_granularity(config.ingest.granularity)
        self._stations: Optional[List[Station]] = None

    def run_all(self) -> None:
        """Run every stage in order."""
        for stage in STAGES:
            self.run(stage)

    def run(self, stage: str) -> List[Path]:
        """Run one stage and write its manifest.

        Returns:
            Paths of the artifacts written

        Raises:
            StageDependencyError: If a prerequisite stage has not been run
            DataError: If a stage rejects its inputs (ValueError inside a stage)
            NumericError: If a numerical routine fails inside a stage
        """
        if stage not in STAGES:
            raise ConfigError(f"Unknown stage '{stage}'; expected one of {STAGES}")
        self._check_dependencies(stage)
        self._out.mkdir(parents=True, exist_ok=True)

        log_banner(logger, f"Stage {stage}")
        started = get_timestamp_string(self._config.general.timezone)
        clock = time.perf_counter()

        try:
            written = getattr(self, f"_{stage}")()
        except PipelineError:
            raise
        except (ArithmeticError, np.linalg.LinAlgError) as e:
            raise NumericError(f"Stage {stage}: {e}") from e
        except ValueError as e:
            raise DataError(f"Stage {stage}: {e}") from e

        wall = time.perf_counter() - clock
        self._write_manifest(stage, written, started, wall)
        logger.info(f"Stage {stage} finished in {format_duration(wall)}")
        return written

    def _check_dependencies(self, stage: str) -> None:
        for required in REQUIRES[stage]:
            missing = [name for name in ARTIFACTS[required] if not (self._out / name).is_file()]
            if missing:
                logger.error(f"Stage {stage}: missing {missing} from stage {required}")
                raise StageDependencyError(stage, required)

    # ------------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------------

    def _ingest(self) -> List[Path]:
        """Parse, bucket and export the observation matrix."""
        self._config.paths.check_inputs_exist()
        records = parse_csv(self._config.paths.observations, self._config.ingest.columns)
        axis = infer_time_axis(
            records, self._granularity, self._custom_days, self._config.ingest.start
        )
        matrix = resample(records, self._load_stations(), axis)

        path = self._out / "matrix.csv"
        write_matrix_csv(matrix, path)
        return [path]

    def _cluster(self) -> List[Path]:
        """Cluster the stations of the exported matrix."""
        matrix = self._read_matrix("matrix.csv")
        cfg = self._config.cluster
        assignment = hsc(matrix.stations, cfg.radius_m, cfg.linkage)

        path = self._out / "clusters.csv"
        write_assignment_csv(assignment, matrix.stations, path)
        return [path]

    def _gapfill(self) -> List[Path]:
        """Impute the matrix; optionally score the imputer and save models."""
        matrix = self._read_matrix("matrix.csv")
        assignment = self._read_assignment(matrix)
        cfg = self._config.gapfill

        result = impute_with_report(
            matrix,
            cfg.train,
            threads=self._config.general.threads,
            assignment=assignment,
            pooling=cfg.pooling,
        )
        if cfg.validation_fraction > 0:
            self._score_imputer(matrix)

        written = [self._out / "imputed.csv", self._out / "imputation_report.csv"]
        write_matrix_csv(result.matrix, written[0])
        write_imputation_report(result, written[1])

        if cfg.save_models:
            models_dir = self._out / "models"
            models_dir.mkdir(exist_ok=True)
            for model_id, model in sorted(result.models.items()):
                path = models_dir / f"{model_id}.json"
                save_model(model, path)
                written.append(path)
        return written

    def _fit(self) -> List[Path]:
        """Fit lag statistics, margins, copulas and STIR tables per cluster."""
        imputed = self._read_matrix("imputed.csv")
        assignment = self._read_assignment(imputed)
        models = fit_cluster_models(imputed, assignment, self._config)

        written = [self._out / name for name in ARTIFACTS["fit"]]
        write_lag_dependence_csv(self._lag_rows(imputed, models), written[0])
        write_margin_report_csv(summarize_margins(models), written[1])
        written[2].write_text(
            build_model_report(models, assignment, imputed.stations), encoding="utf-8"
        )
        write_stir_tables_csv({c: m.table for c, m in models.items()}, written[3])
        return written

    def _interpolate(self) -> List[Path]:
        """Rasterize the configured bounding box and time layers."""
        imputed = self._read_matrix("imputed.csv")
        assignment = self._read_assignment(imputed)
        tables = read_stir_tables_csv(self._out / "stir_tables.csv")
        cfg = self._config.interpolation

        bbox = cfg.bbox if cfg.bbox is not None else default_bbox(imputed, cfg.cell_deg)
        times = cfg.times if cfg.times is not None else list(range(imputed.n_times))
        outside = [t for t in times if not 0 <= t < imputed.n_times]
        if outside:
            raise ConfigError(
                f"interpolation.times {outside} outside the time axis [0, {imputed.n_times})"
            )
        grid = interpolate_grid(
            imputed,
            assignment,
            tables,
            tuple(bbox),
            cfg.cell_deg,
            times,
            cfg.mode,
            cfg.donors,
            self._config.general.threads,
        )

        written = [self._out / "grid.csv", self._out / "grid.geojson"]
        write_grid_csv(grid, written[0])
        write_grid_geojson(grid, written[1])
        return written

    def _evaluate(self) -> List[Path]:
        """Holdout (and leave-one-station-out) scores of the full pipeline."""
        matrix = self._read_matrix("matrix.csv")
        reports: List[Tuple[str, MetricReport]] = [("holdout", holdout_eval(matrix, self._config))]
        if self._config.evaluation.loso:
            if matrix.n_stations >= MIN_LOSO_STATIONS:
                reports.append(("loso", loso_eval(matrix, self._config)))
            else:
                logger.warning(
                    f"LOSO skipped: {matrix.n_stations} stations (< {MIN_LOSO_STATIONS})"
                )

        written = [self._out / "metrics.csv", self._out / "metrics.txt"]
        write_metric_report(reports[0][1], written[0])
        for name, report in reports[1:]:
            path = self._out / f"metrics_{name}.csv"
            write_metric_report(report, path)
            written.append(path)
        written[1].write_text(
            "".join(build_metric_report(name, report) for name, report in reports),
            encoding="utf-8",
        )
        return written

    # ------------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------------

    def _load_stations(self) -> List[Station]:
        if self._stations is None:
            self._config.paths.check_inputs_exist()
            self._stations = load_stations(self._config.paths.stations)
        return self._stations

    def _read_matrix(self, name: str) -> ObservationMatrix:
        return read_matrix_csv(
            self._out / name, self._load_stations(), self._granularity, self._custom_days
        )

    def _read_assignment(self, matrix: ObservationMatrix) -> ClusterAssignment:
        return read_assignment_csv(
            self._out / "clusters.csv", matrix.stations, self._config.cluster.radius_m
        )

    def _score_imputer(self, matrix: ObservationMatrix) -> None:
        fraction = self._config.gapfill.validation_fraction
        for i, station in enumerate(matrix.stations):
            try:
                score = evaluate_split(matrix.values[i], self._config.gapfill.train, fraction)
            except InsufficientData as e:
                logger.info(f"Imputer split score skipped for {station.id}: {e}")
                continue
            logger.info(
                f"Imputer split score {station.id}: RMSE {score.rmse:.6f} "
                f"(mean baseline {score.mean_rmse:.6f}, n {score.n})"
            )

    def _lag_rows(self, matrix: ObservationMatrix, models: Dict[int, ClusterModel]):
        lag_cfg = self._config.lagdep
        rows = []
        pooled_listed = False
        for cluster, model in sorted(models.items()):
            if model.pooled:
                if pooled_listed:
                    continue
                pooled_listed = True
                scope = "pooled"
            else:
                scope = f"cluster:{cluster}"
            rows.append(("spatial", scope, model.dep_h))
            rows.append(("temporal", scope, model.dep_tau))
        per_station = station_lag_dependences(
            matrix, lag_cfg.temporal_max_lag, lag_cfg.bin_width, lag_cfg.orientation
        )
        rows.extend(("temporal", f"station:{sid}", dep) for sid, dep in per_station.items())
        return rows

    def _write_manifest(self, stage: str, written: Sequence[Path], started: str, wall: float):
        manifest = {
            "stage": stage,
            "started": started,
            "wall_time": format_duration(wall),
            "seed": self._config.general.seed,
            "threads": self._config.general.threads,
            "versions": package_versions(),
            "config": self._config.snapshot(),
            "artifacts": {
                str(path.relative_to(self._out)): _sha256(path) for path in written
            },
        }
        path = self._out / f"manifest_{stage}.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def package_versions() -> Dict[str, str]:
    """Installed versions of the numerical stack and the interpreter."""
    versions = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def format_error_line(error: PipelineError) -> str:
    """One machine-parseable line: error category=<C> exit=<N> message="<text>"."""
    message = str(error).replace('"', "'").replace("\n", " ")
    return f'error category={error.category} exit={error.exit_code} message="{message}"'


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per stage plus `all`."""
    parser = argparse.ArgumentParser(
        prog="stinterp",
        description="Spatio-temporal copula interpolation of station time series",
    )
    parser.add_argument("command", choices=STAGES + ("all",), help="Stage to run")
    parser.add_argument("--config", help="Path to the YAML configuration")
    parser.add_argument("--seed", type=int, help="Global seed")
    parser.add_argument("--threads", type=int, help="Worker cap (1 = fully serial)")
    parser.add_argument("--out", dest="output_dir", help="Output directory")
    parser.add_argument("--granularity", help="Bucket size: 1m, 2m, 3m or <N>d")
    parser.add_argument("--mode", choices=("literal", "normalized"), help="Scaling mode")
    parser.add_argument("--radius-m", dest="radius_m", type=float, help="Cluster radius (m)")
    parser.add_argument("--epochs", type=int, help="BLSTM training epochs")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING, ERROR")
    return parser


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that override the configuration file."""
    keys = (
        "seed", "threads", "output_dir", "granularity", "mode", "radius_m", "epochs", "log_level",
    )
    return {key: getattr(args, key) for key in keys if getattr(args, key) is not None}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand.

    Returns:
        0 on success, the error category's exit code on a pipeline error,
        1 on an unexpected error, 130 when interrupted
    """
    args = build_parser().parse_args(argv)

    try:
        config = PipelineConfig.load(args.config, overrides_from(args))
    except ConfigError as e:
        print(format_error_line(e), file=sys.stderr)
        return e.exit_code

    app_logger = setup_logger(
        name="src",
        level=config.general.log_level,
        log_file=str(Path(config.paths.output_dir) / "run.log"),
    )
    log_banner(app_logger, f"Spatio-temporal interpolation - {args.command} - Starting")

    try:
        runner = StageRunner(config)
        if args.command == "all":
            runner.run_all()
        else:
            runner.run(args.command)
        return 0

    except PipelineError as e:
        app_logger.error(f"{e.category}: {e}")
        for detail in e.errors:
            app_logger.error(f"  {detail}")
        print(format_error_line(e), file=sys.stderr)
        return e.exit_code

    except KeyboardInterrupt:
        app_logger.info("Execution interrupted by user")
        return 130

    except Exception as e:
        app_logger.critical(f"Unexpected error: {e}", exc_info=True)
        print(format_error_line(PipelineError(f"Unexpected error: {e}")), file=sys.stderr)
        return 1

    finally:
        log_banner(app_logger, f"Spatio-temporal interpolation - {args.command} - Finished")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
