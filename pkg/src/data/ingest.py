"""Observation ingestion and temporal resampling.

Parses CPCB-style station time-series exports and station coordinate
files, buckets records to the configured granularity (arithmetic mean
per bucket) and reads/writes the matrix export used between stages.
"""

import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd

from ..errors import DataError
from .models import Granularity, ObservationMatrix, Station, TimeAxis, validate


logger = logging.getLogger(__name__)

Stream = Union[BinaryIO, TextIO, str, Path]

DEFAULT_SCHEMA = {"station_id": "station_id", "timestamp": "timestamp", "value": "value"}

# enough digits for float64 to read back unchanged
MATRIX_FLOAT_FORMAT = "%.17g"


class MissingColumn(DataError):
    """A configured column is absent from the CSV header."""


class EmptyInput(DataError):
    """The input has a header but no data rows."""


class UnknownStation(DataError):
    """A record refers to a station id not in the station list."""


class InvalidRecord(DataError):
    """A row cannot be turned into a record (bad timestamp or empty id)."""


@dataclass(frozen=True)
class RawRecord:
    """One parsed observation row.

    Attributes:
        station_id: Non-empty station identifier
        timestamp: Calendar date-time of the reading
        value: Field value, or None when absent/unparseable
    """

    station_id: str
    timestamp: datetime
    value: Optional[float]


def parse_csv(stream: Stream, schema: Optional[Dict[str, str]] = None) -> List[RawRecord]:
    """Parse an observations CSV into raw records.

    Args:
        stream: Byte/text stream or path of the CSV
        schema: Map of logical column (station_id, timestamp, value) to header name

    Returns:
        One RawRecord per data row; unparseable values become None

    Raises:
        MissingColumn: If a schema column is not in the header
        EmptyInput: If there are no data rows
        InvalidRecord: If a timestamp cannot be parsed or a station id is empty
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    frame = _read_frame(stream)

    missing = [name for name in schema.values() if name not in frame.columns]
    if missing:
        raise MissingColumn(f"Columns not in header: {missing}", list(frame.columns))
    if frame.empty:
        raise EmptyInput("Observation CSV has no data rows")

    ids = frame[schema["station_id"]].fillna("").astype(str).str.strip()
    if (ids == "").any():
        row = int(np.flatnonzero((ids == "").to_numpy())[0])
        raise InvalidRecord(f"Empty station id in data row {row + 1}")

    timestamps = pd.to_datetime(frame[schema["timestamp"]], format="ISO8601", errors="coerce")
    if timestamps.isna().any():
        row = int(np.flatnonzero(timestamps.isna().to_numpy())[0])
        raise InvalidRecord(
            f"Unparseable timestamp in data row {row + 1}: "
            f"'{frame[schema['timestamp']].iloc[row]}'"
        )

    values = pd.to_numeric(frame[schema["value"]], errors="coerce")
    records = [
        RawRecord(
            station_id=station_id,
            timestamp=ts.to_pydatetime(),
            value=None if pd.isna(value) else float(value),
        )
        for station_id, ts, value in zip(ids, timestamps, values)
    ]

    absent = sum(1 for r in records if r.value is None)
    logger.info(f"Parsed {len(records)} records ({absent} without a usable value)")
    return records


def load_stations(stream: Stream) -> List[Station]:
    """Parse a stations CSV with columns id, lat, lon.

    Raises:
        MissingColumn: If id, lat or lon is missing
        EmptyInput: If there are no rows
        DataError: On duplicate ids or invalid coordinates
    """
    frame = _read_frame(stream)
    missing = [name for name in ("id", "lat", "lon") if name not in frame.columns]
    if missing:
        raise MissingColumn(f"Stations CSV lacks columns: {missing}")
    if frame.empty:
        raise EmptyInput("Stations CSV has no data rows")

    stations: List[Station] = []
    seen = set()
    for row in frame.itertuples(index=False):
        station_id = str(row.id).strip()
        if station_id in seen:
            raise DataError(f"Duplicate station id: {station_id}")
        seen.add(station_id)
        try:
            stations.append(Station(id=station_id, lat=float(row.lat), lon=float(row.lon)))
        except ValueError as e:
            raise DataError(f"Invalid station row: {e}") from e

    logger.info(f"Loaded {len(stations)} stations")
    return stations


def infer_time_axis(
    records: Sequence[RawRecord],
    granularity: Granularity,
    custom_days: Optional[int] = None,
    start: Optional[date] = None,
) -> TimeAxis:
    """Derive the axis covering every record.

    Start defaults to the first day of the earliest record's month.

    Raises:
        EmptyInput: If there are no records
    """
    if not records:
        raise EmptyInput("Cannot infer a time axis from zero records")

    first = min(r.timestamp for r in records).date()
    last = max(r.timestamp for r in records).date()
    if start is None:
        start = first.replace(day=1)

    two_buckets = TimeAxis(start=start, granularity=granularity, count=2, custom_days=custom_days)
    count = max(2, two_buckets.bucket_index(last) + 1)
    return TimeAxis(start=start, granularity=granularity, count=count, custom_days=custom_days)


def resample(
    records: Sequence[RawRecord],
    stations: Sequence[Station],
    axis: TimeAxis,
) -> ObservationMatrix:
    """Aggregate records to an n x k matrix of bucket means.

    Nonpositive values are demoted to missing. Buckets without any present
    value are missing. Records outside the axis are skipped. The result is
    independent of record order (bucket sums use exactly rounded fsum).

    Raises:
        UnknownStation: If a record's station id is not in `stations`
    """
    index = {station.id: i for i, station in enumerate(stations)}
    buckets: Dict[tuple, List[float]] = defaultdict(list)
    demoted = 0
    outside = 0

    for record in records:
        if record.station_id not in index:
            raise UnknownStation(f"Record for unknown station '{record.station_id}'")
        j = axis.bucket_index(record.timestamp.date())
        if not 0 <= j < axis.count:
            outside += 1
            continue
        if record.value is None or not math.isfinite(record.value):
            continue
        if record.value <= 0:
            demoted += 1
            continue
        buckets[(index[record.station_id], j)].append(record.value)

    if demoted:
        logger.warning(f"{demoted} nonpositive values treated as missing")
    if outside:
        logger.warning(f"{outside} records outside the time axis skipped")

    values = np.full((len(stations), axis.count), np.nan)
    for (i, j), cell in buckets.items():
        values[i, j] = math.fsum(cell) / len(cell)

    matrix = ObservationMatrix.from_values(list(stations), axis, values)
    violations = validate(matrix)
    if violations:
        raise DataError("Resampled matrix is invalid", violations)

    logger.info(
        f"Resampled to {matrix.n_stations} x {matrix.n_times} matrix "
        f"({int(matrix.observed.sum())} observed cells)"
    )
    return matrix


def write_matrix_csv(matrix: ObservationMatrix, path: Union[str, Path]) -> None:
    """Write one row per station, one column per bucket; missing cells empty.

    Values keep full round-trip precision since later stages read them back.
    """
    frame = pd.DataFrame(matrix.values, columns=matrix.time_axis.labels())
    frame.insert(0, "station_id", matrix.station_ids)
    frame.to_csv(
        path, index=False, float_format=MATRIX_FLOAT_FORMAT, na_rep="", lineterminator="\n"
    )


def read_matrix_csv(
    path: Union[str, Path],
    stations: Sequence[Station],
    granularity: Granularity,
    custom_days: Optional[int] = None,
) -> ObservationMatrix:
    """Read a matrix export back, re-attaching station coordinates.

    Raises:
        UnknownStation: If a row's station is not in `stations`
    """
    frame = pd.read_csv(path, dtype={"station_id": str}, float_precision="round_trip")
    by_id = {s.id: s for s in stations}
    unknown = [sid for sid in frame["station_id"] if sid not in by_id]
    if unknown:
        raise UnknownStation(f"Matrix rows for unknown stations: {unknown}")

    labels = list(frame.columns[1:])
    axis = TimeAxis(
        start=date.fromisoformat(labels[0]),
        granularity=granularity,
        count=len(labels),
        custom_days=custom_days,
    )
    values = frame[labels].to_numpy(dtype=float)
    return ObservationMatrix.from_values([by_id[s] for s in frame["station_id"]], axis, values)


def _read_frame(stream: Stream) -> pd.DataFrame:
    """Read a CSV into strings-first DataFrame, mapping an empty stream to EmptyInput."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    try:
        return pd.read_csv(stream, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise EmptyInput("Input is empty (no header row)") from e
