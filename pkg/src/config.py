"""Configuration management for the spatio-temporal copula interpolator.

This module handles loading and validating the pipeline configuration
from YAML files, environment variables and command-line overrides.
"""

import os
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .data.models import MAX_MONTHLY_START_DAY
from .errors import ConfigError


DEFAULT_RADIUS_M = 18026.0
VALID_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
VALID_FAMILIES = ["weibull", "gumbel", "frechet", "gev", "blended"]


# ============================================================================
# Configuration Dataclasses
# ============================================================================


@dataclass
class GeneralConfig:
    """General run configuration."""

    log_level: str
    timezone: str
    seed: int
    threads: int

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        self._validate_log_level()
        self.log_level = self.log_level.upper()
        self._validate_threads()

    def _validate_log_level(self) -> None:
        """Validate that log level is one of the allowed values."""
        if self.log_level.upper() not in VALID_LOG_LEVELS:
            raise ValueError(
                f"Log level must be one of {VALID_LOG_LEVELS}, got '{self.log_level}'"
            )

    def _validate_threads(self) -> None:
        """Validate that the worker cap is positive."""
        if self.threads < 1:
            raise ValueError(f"Threads must be at least 1, got {self.threads}")


@dataclass
class PathsConfig:
    """Input and output locations."""

    observations: str
    stations: str
    output_dir: str

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if not self.observations or not self.stations:
            raise ValueError("Observations and stations paths are required")
        if not self.output_dir:
            raise ValueError("Output directory is required")

    def check_inputs_exist(self) -> None:
        """Check that both input files are resolvable.

        Raises:
            ConfigError: If an input file does not exist
        """
        for label, path in (("observations", self.observations), ("stations", self.stations)):
            if not Path(path).is_file():
                raise ConfigError(f"{label.capitalize()} file not found: {path}")


@dataclass
class IngestConfig:
    """Observation parsing and temporal resampling."""

    granularity: str
    start: Optional[date]
    columns: Dict[str, str]

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        self._validate_granularity()
        self._validate_columns()
        self._validate_start()

    def _validate_granularity(self) -> None:
        """Validate the granularity token (1m, 2m, 3m or <N>d)."""
        token = self.granularity.strip().lower()
        if token in ("1m", "2m", "3m"):
            return
        if token.endswith("d") and token[:-1].isdigit() and int(token[:-1]) > 0:
            return
        raise ValueError(
            f"Granularity must be one of 1m, 2m, 3m or <N>d, got '{self.granularity}'"
        )

    def _validate_start(self) -> None:
        """Validate that monthly buckets start on a day every month has."""
        monthly = self.granularity.strip().lower() in ("1m", "2m", "3m")
        if monthly and self.start is not None and self.start.day > MAX_MONTHLY_START_DAY:
            raise ValueError(
                f"Start date for monthly granularity must fall on day "
                f"1-{MAX_MONTHLY_START_DAY}, got {self.start.isoformat()}"
            )

    def _validate_columns(self) -> None:
        """Validate that every schema column is named."""
        required = ["station_id", "timestamp", "value"]
        missing = [key for key in required if not self.columns.get(key)]
        if missing:
            raise ValueError(f"Column names missing for: {missing}")


@dataclass
class ClusterConfig:
    """Hierarchical spatial clustering."""

    radius_m: float
    linkage: str

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.radius_m <= 0:
            raise ValueError(f"Cluster radius must be positive, got {self.radius_m}")
        if self.linkage not in ("complete", "single"):
            raise ValueError(
                f"Linkage must be 'complete' or 'single', got '{self.linkage}'"
            )


@dataclass
class TrainConfig:
    """BLSTM training hyperparameters."""

    hidden_size: int = 16
    window: int = 12
    learning_rate: float = 1e-2
    epochs: int = 200
    seed: int = 0
    clip_norm: float = 5.0

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.hidden_size < 1:
            raise ValueError(f"Hidden size must be at least 1, got {self.hidden_size}")
        if self.window < 2:
            raise ValueError(f"Window length must be at least 2, got {self.window}")
        if self.learning_rate <= 0:
            raise ValueError(
                f"Learning rate must be positive, got {self.learning_rate}"
            )
        if self.epochs < 1:
            raise ValueError(f"Epochs must be at least 1, got {self.epochs}")
        if self.clip_norm <= 0:
            raise ValueError(f"Clip norm must be positive, got {self.clip_norm}")


@dataclass
class GapfillConfig:
    """Imputation settings around the BLSTM trainer."""

    train: TrainConfig
    pooling: str = "station"
    validation_fraction: float = 0.0
    save_models: bool = False

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.pooling not in ("station", "cluster"):
            raise ValueError(
                f"Pooling must be 'station' or 'cluster', got '{self.pooling}'"
            )
        if not 0 <= self.validation_fraction < 1:
            raise ValueError(
                f"Validation fraction must be in [0, 1), got {self.validation_fraction}"
            )


@dataclass
class LagDependenceConfig:
    """Influence-ratio statistics."""

    temporal_max_lag: int = 3
    bin_width: Optional[float] = None
    orientation: str = "index"

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.temporal_max_lag < 1:
            raise ValueError(
                f"Temporal max lag must be at least 1, got {self.temporal_max_lag}"
            )
        if self.bin_width is not None and self.bin_width <= 0:
            raise ValueError(f"Bin width must be positive, got {self.bin_width}")
        if self.orientation not in ("index", "minmax"):
            raise ValueError(
                f"Orientation must be 'index' or 'minmax', got '{self.orientation}'"
            )


@dataclass
class MarginsConfig:
    """Extreme-value margin candidates."""

    candidates: List[str] = field(
        default_factory=lambda: ["weibull", "gumbel", "frechet", "gev", "blended"]
    )
    blended_components: Tuple[str, str] = ("weibull", "weibull")

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if not self.candidates:
            raise ValueError("At least one margin candidate is required")
        unknown = [c for c in self.candidates if c not in VALID_FAMILIES]
        if unknown:
            raise ValueError(f"Unknown margin families {unknown}; valid: {VALID_FAMILIES}")
        components = [c for c in self.blended_components if c not in VALID_FAMILIES[:-1]]
        if len(self.blended_components) != 2 or components:
            raise ValueError(
                f"Blended components must be two of {VALID_FAMILIES[:-1]}, "
                f"got {list(self.blended_components)}"
            )


@dataclass
class LagGridConfig:
    """Search grid for the most-likely-lag argmax."""

    h_steps: int = 200
    quantile_low: float = 0.001
    quantile_high: float = 0.999

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.h_steps < 2:
            raise ValueError(f"h_steps must be at least 2, got {self.h_steps}")
        if not 0 < self.quantile_low < self.quantile_high < 1:
            raise ValueError(
                "Quantile bounds must satisfy 0 < low < high < 1, "
                f"got ({self.quantile_low}, {self.quantile_high})"
            )


@dataclass
class InterpolationConfig:
    """Raster interpolation settings."""

    bbox: Optional[Tuple[float, float, float, float]] = None
    cell_deg: float = 0.01
    times: Optional[List[int]] = None
    mode: str = "literal"
    donors: int = 1

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.mode not in ("literal", "normalized"):
            raise ValueError(
                f"Mode must be 'literal' or 'normalized', got '{self.mode}'"
            )
        if self.cell_deg <= 0:
            raise ValueError(f"Cell size must be positive, got {self.cell_deg}")
        if self.donors < 1:
            raise ValueError(f"Donor count must be at least 1, got {self.donors}")
        if self.times is not None and any(t < 0 for t in self.times):
            raise ValueError(f"Time indices must be nonnegative, got {self.times}")
        if self.bbox is not None:
            self._validate_bbox()

    def _validate_bbox(self) -> None:
        """Validate bbox as (min_lon, min_lat, max_lon, max_lat)."""
        if len(self.bbox) != 4:
            raise ValueError(f"Bounding box needs 4 values, got {len(self.bbox)}")
        min_lon, min_lat, max_lon, max_lat = self.bbox
        if not (min_lon < max_lon and min_lat < max_lat):
            raise ValueError(f"Bounding box is empty: {list(self.bbox)}")


@dataclass
class EvaluationConfig:
    """Validation protocols."""

    holdout_fraction: float = 0.1
    loso: bool = True

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if not 0 < self.holdout_fraction < 1:
            raise ValueError(
                f"Holdout fraction must be in (0, 1), got {self.holdout_fraction}"
            )


@dataclass
class PipelineConfig:
    """Main configuration container."""

    general: GeneralConfig
    paths: PathsConfig
    ingest: IngestConfig
    cluster: ClusterConfig
    gapfill: GapfillConfig
    lagdep: LagDependenceConfig = field(default_factory=LagDependenceConfig)
    margins: MarginsConfig = field(default_factory=MarginsConfig)
    lag_grid: LagGridConfig = field(default_factory=LagGridConfig)
    interpolation: InterpolationConfig = field(default_factory=InterpolationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    @classmethod
    def load(
        cls,
        config_path: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> "PipelineConfig":
        """Load configuration from YAML file and apply overrides.

        Args:
            config_path: Path to config YAML file. If None, uses default locations.
            overrides: Flat mapping of command-line overrides (flag wins)

        Returns:
            Loaded and validated PipelineConfig object

        Raises:
            ConfigError: If the file is missing or the configuration is invalid
        """
        try:
            path = _find_config_file(config_path)
            data = _load_yaml_file(path)
            _apply_overrides(data, overrides or {})
            return cls.from_dict(data)
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from e
        except (ValueError, TypeError, yaml.YAMLError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        """Build a configuration from an already parsed mapping."""
        general = _parse_general_config(data)
        return cls(
            general=general,
            paths=_parse_paths_config(data),
            ingest=_parse_ingest_config(data),
            cluster=_parse_cluster_config(data),
            gapfill=_parse_gapfill_config(data, general.seed),
            lagdep=_parse_lagdep_config(data),
            margins=_parse_margins_config(data),
            lag_grid=_parse_lag_grid_config(data),
            interpolation=_parse_interpolation_config(data),
            evaluation=_parse_evaluation_config(data),
        )

    def snapshot(self) -> Dict[str, Any]:
        """Return a JSON-serializable copy of the configuration."""
        data = asdict(self)
        start = data["ingest"]["start"]
        data["ingest"]["start"] = start.isoformat() if start else None
        return data


# ============================================================================
# Private Helper Functions (Config Loading)
# ============================================================================


def _find_config_file(config_path: Optional[str]) -> str:
    """Find configuration file from given path or default locations.

    Args:
        config_path: Optional path to config file

    Returns:
        Path to config file

    Raises:
        FileNotFoundError: If config file not found in any location
    """
    if config_path is not None:
        if Path(config_path).exists():
            return config_path
        raise FileNotFoundError(f"Config file not found: {config_path}")

    env_path = os.getenv("STINTERP_CONFIG_PATH")
    if env_path and Path(env_path).exists():
        return env_path

    default_paths = ["config.yaml", "config/config.yaml"]
    for path in default_paths:
        if Path(path).exists():
            return path

    raise FileNotFoundError(
        "Config file not found. Tried: STINTERP_CONFIG_PATH env var, "
        "config.yaml, config/config.yaml"
    )


def _load_yaml_file(path: str) -> Dict[str, Any]:
    """Load and parse YAML configuration file.

    Raises:
        ValueError: If file is empty or not a mapping
    """
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)

    if data is None:
        raise ValueError(f"Config file is empty: {path}")
    if not isinstance(data, dict):
        raise ValueError(f"Config file must contain a mapping: {path}")

    return data


# Flat override key -> (section, key)
_OVERRIDE_TARGETS = {
    "seed": ("general", "seed"),
    "threads": ("general", "threads"),
    "log_level": ("general", "log_level"),
    "output_dir": ("paths", "output_dir"),
    "granularity": ("ingest", "granularity"),
    "radius_m": ("cluster", "radius_m"),
    "epochs": ("gapfill", "epochs"),
    "mode": ("interpolation", "mode"),
}


def _apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> None:
    """Write non-None command-line overrides into the parsed mapping."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _OVERRIDE_TARGETS:
            raise ValueError(f"Unknown override: {key}")
        section, name = _OVERRIDE_TARGETS[key]
        section_data = data.get(section) or {}
        section_data[name] = value
        data[section] = section_data


def _resolve_env_var(value: Any) -> Any:
    """Resolve environment variable references in config values.

    Supports formats: ${VAR_NAME} or $VAR_NAME
    """
    if not value or not isinstance(value, str):
        return value

    if value.startswith("${") and value.endswith("}"):
        return os.getenv(value[2:-1], "")

    if value.startswith("$"):
        return os.getenv(value[1:], "")

    return value


def _parse_string_to_float(value: Any) -> float:
    """Parse string or numeric value to float, accepting a decimal comma."""
    if isinstance(value, bool):
        raise ValueError(f"Cannot parse value to float: {value}")

    if isinstance(value, (int, float)):
        return float(value)

    if isinstance(value, str):
        return float(value.replace(",", "."))

    raise ValueError(f"Cannot parse value to float: {value}")


def _parse_date(value: Any) -> Optional[date]:
    """Parse an optional ISO calendar date."""
    if value is None or value == "":
        return None
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


# ============================================================================
# Private Helper Functions (Config Parsing)
# ============================================================================


def _parse_general_config(data: Dict[str, Any]) -> GeneralConfig:
    """Parse general configuration section."""
    general_data = data.get("general") or {}

    if general_data.get("seed") is None:
        raise ValueError("general.seed is required (runs are never wall-clock seeded)")

    return GeneralConfig(
        log_level=general_data.get("log_level", "INFO"),
        timezone=general_data.get("timezone", "UTC"),
        seed=int(general_data["seed"]),
        threads=int(general_data.get("threads", 1)),
    )


def _parse_paths_config(data: Dict[str, Any]) -> PathsConfig:
    """Parse paths section.

    Raises:
        ValueError: If paths section is missing
    """
    paths_data = data.get("paths")
    if not paths_data:
        raise ValueError("Missing 'paths' section in config")

    return PathsConfig(
        observations=_resolve_env_var(paths_data.get("observations", "")),
        stations=_resolve_env_var(paths_data.get("stations", "")),
        output_dir=_resolve_env_var(paths_data.get("output_dir", "output")),
    )


def _parse_ingest_config(data: Dict[str, Any]) -> IngestConfig:
    """Parse ingest section."""
    ingest_data = data.get("ingest") or {}
    columns = {"station_id": "station_id", "timestamp": "timestamp", "value": "value"}
    columns.update(ingest_data.get("columns") or {})

    return IngestConfig(
        granularity=str(ingest_data.get("granularity", "1m")),
        start=_parse_date(ingest_data.get("start")),
        columns=columns,
    )


def _parse_cluster_config(data: Dict[str, Any]) -> ClusterConfig:
    """Parse cluster section; radius defaults to 18026 m."""
    cluster_data = data.get("cluster") or {}
    radius = cluster_data.get("radius_m")

    return ClusterConfig(
        radius_m=DEFAULT_RADIUS_M if radius is None else _parse_string_to_float(radius),
        linkage=cluster_data.get("linkage", "complete"),
    )


def _parse_gapfill_config(data: Dict[str, Any], seed: int) -> GapfillConfig:
    """Parse gapfill section; the trainer seed follows general.seed."""
    gap_data = data.get("gapfill") or {}
    train = TrainConfig(
        hidden_size=int(gap_data.get("hidden_size", 16)),
        window=int(gap_data.get("window", 12)),
        learning_rate=_parse_string_to_float(gap_data.get("learning_rate", 1e-2)),
        epochs=int(gap_data.get("epochs", 200)),
        seed=seed,
        clip_norm=_parse_string_to_float(gap_data.get("clip_norm", 5.0)),
    )

    return GapfillConfig(
        train=train,
        pooling=gap_data.get("pooling", "station"),
        validation_fraction=_parse_string_to_float(
            gap_data.get("validation_fraction", 0.0)
        ),
        save_models=bool(gap_data.get("save_models", False)),
    )


def _parse_lagdep_config(data: Dict[str, Any]) -> LagDependenceConfig:
    """Parse lag-dependence section."""
    lag_data = data.get("lagdep") or {}
    width = lag_data.get("bin_width")

    return LagDependenceConfig(
        temporal_max_lag=int(lag_data.get("temporal_max_lag", 3)),
        bin_width=None if width is None else _parse_string_to_float(width),
        orientation=lag_data.get("orientation", "index"),
    )


def _parse_margins_config(data: Dict[str, Any]) -> MarginsConfig:
    """Parse margins section."""
    margin_data = data.get("margins") or {}
    defaults = MarginsConfig()

    return MarginsConfig(
        candidates=[str(c).lower() for c in margin_data.get("candidates", defaults.candidates)],
        blended_components=tuple(
            str(c).lower()
            for c in margin_data.get("blended_components", defaults.blended_components)
        ),
    )


def _parse_lag_grid_config(data: Dict[str, Any]) -> LagGridConfig:
    """Parse lag-grid section."""
    grid_data = data.get("lag_grid") or {}

    return LagGridConfig(
        h_steps=int(grid_data.get("h_steps", 200)),
        quantile_low=_parse_string_to_float(grid_data.get("quantile_low", 0.001)),
        quantile_high=_parse_string_to_float(grid_data.get("quantile_high", 0.999)),
    )


def _parse_interpolation_config(data: Dict[str, Any]) -> InterpolationConfig:
    """Parse interpolation section."""
    interp_data = data.get("interpolation") or {}
    bbox = interp_data.get("bbox")
    times = interp_data.get("times")

    return InterpolationConfig(
        bbox=None if bbox is None else tuple(_parse_string_to_float(v) for v in bbox),
        cell_deg=_parse_string_to_float(interp_data.get("cell_deg", 0.01)),
        times=None if times is None else [int(t) for t in times],
        mode=interp_data.get("mode", "literal"),
        donors=int(interp_data.get("donors", 1)),
    )


def _parse_evaluation_config(data: Dict[str, Any]) -> EvaluationConfig:
    """Parse evaluation section."""
    eval_data = data.get("evaluation") or {}

    return EvaluationConfig(
        holdout_fraction=_parse_string_to_float(eval_data.get("holdout_fraction", 0.1)),
        loso=bool(eval_data.get("loso", True)),
    )
