"""Seeded synthetic datasets for demos and tests.

The network mirrors five Delhi monitoring sites. Readings share a
seasonal cycle peaking in November, a regional monthly shock and
station-level noise, so nearby stations move together.
"""

import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .data.models import Granularity, ObservationMatrix, Station, TimeAxis


DELHI_STATIONS: Tuple[Station, ...] = (
    Station("S01", 28.6469, 77.3152),  # Anand Vihar
    Station("S02", 28.6286, 77.2410),  # ITO
    Station("S03", 28.5633, 77.1869),  # RK Puram
    Station("S04", 28.5921, 77.0460),  # Dwarka
    Station("S05", 28.8227, 77.1018),  # Narela
)

PEAK_MONTH = 11


@dataclass(frozen=True)
class SyntheticDataset:
    """Stations plus raw readings in the observations CSV layout."""

    stations: Tuple[Station, ...]
    observations: pd.DataFrame

    def write(self, directory: Union[str, Path]) -> Tuple[Path, Path]:
        """Write stations.csv and observations.csv; return their paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stations_path = directory / "stations.csv"
        observations_path = directory / "observations.csv"
        pd.DataFrame(
            [(s.id, s.lat, s.lon) for s in self.stations], columns=["id", "lat", "lon"]
        ).to_csv(stations_path, index=False, float_format="%.4f", lineterminator="\n")
        self.observations.to_csv(
            observations_path, index=False, float_format="%.2f", na_rep="NA", lineterminator="\n"
        )
        return stations_path, observations_path


def seasonal_level(month: int, base: float = 120.0, amplitude: float = 0.6) -> float:
    """Mean level of a calendar month (1-12), highest in November."""
    return base * (1.0 + amplitude * math.cos(2.0 * math.pi * (month - PEAK_MONTH) / 12.0))


def generate_dataset(
    seed: int = 42,
    stations: Sequence[Station] = DELHI_STATIONS,
    start: date = date(2019, 1, 1),
    months: int = 24,
    readings_per_month: int = 3,
    missing_fraction: float = 0.05,
    noise: float = 0.08,
) -> SyntheticDataset:
    """Raw readings with a November peak, shared shocks and some "NA" values.

    Args:
        seed: Generator seed; same seed, same dataset
        stations: Station network
        start: First day of the first month
        months: Number of calendar months
        readings_per_month: Readings per station per month (days 5, 15, 25, ...)
        missing_fraction: Share of readings reported as NA
        noise: Relative station-level noise

    Returns:
        SyntheticDataset with columns station_id, timestamp, value
    """
    rng = np.random.default_rng(seed)
    offsets = 1.0 + 0.15 * rng.standard_normal(len(stations))
    days = [5 + 10 * r for r in range(readings_per_month)]

    rows: List[Tuple[str, str, float]] = []
    for m in range(months):
        total = start.month - 1 + m
        year, month = start.year + total // 12, total % 12 + 1
        shock = math.exp(0.1 * rng.standard_normal())
        level = seasonal_level(month) * shock
        for day in days:
            when = date(year, month, min(day, 28)).isoformat() + "T10:00:00"
            for s, station in enumerate(stations):
                value = level * offsets[s] * math.exp(noise * rng.standard_normal())
                if rng.random() < missing_fraction:
                    value = float("nan")
                rows.append((station.id, when, value))

    frame = pd.DataFrame(rows, columns=["station_id", "timestamp", "value"])
    return SyntheticDataset(tuple(stations), frame)


def sinusoid_series(
    n: int = 96,
    period: int = 12,
    mean: float = 50.0,
    amplitude: float = 20.0,
    noise: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """mean + amplitude * sin(2 pi t / period), plus optional Gaussian noise."""
    t = np.arange(n, dtype=float)
    series = mean + amplitude * np.sin(2.0 * np.pi * t / period)
    if noise > 0:
        series = series + noise * np.random.default_rng(seed).standard_normal(n)
    return series


def sinusoid_matrix(
    stations: Sequence[Station] = DELHI_STATIONS,
    n: int = 96,
    period: int = 12,
    missing_fraction: float = 0.0,
    seed: int = 0,
) -> Tuple[ObservationMatrix, ObservationMatrix]:
    """Phase-shifted sinusoids per station, as (complete, masked) matrices."""
    rng = np.random.default_rng(seed)
    values = np.vstack(
        [np.roll(sinusoid_series(n, period), i) for i in range(len(stations))]
    )
    axis = TimeAxis(start=date(2019, 1, 1), granularity=Granularity.ONE_MONTH, count=n)
    complete = ObservationMatrix.from_values(list(stations), axis, values)

    masked_values = values.copy()
    cells = masked_values.size
    count = int(round(missing_fraction * cells))
    if count:
        flat = np.sort(rng.choice(cells, size=count, replace=False))
        masked_values.flat[flat] = np.nan
    return complete, ObservationMatrix.from_values(list(stations), axis, masked_values)
