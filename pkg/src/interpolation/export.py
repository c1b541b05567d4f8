"""Raster and STIR-table exports.

CSV numerics are fixed at 6 decimals; GeoJSON cells are polygons with
the interpolated value, time index and donor id as properties.
"""

import json
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from ..utils.formatting import round6
from .interpolator import InterpolationGrid, StirRow, StirTable


GRID_COLUMNS = ["lon", "lat", "time_index", "value", "donor_id"]
STIR_COLUMNS = [
    "cluster", "r_h", "r_tau", "h_star", "tau_star", "density_at_max", "h_span", "tau_span",
]


def grid_frame(grid: InterpolationGrid) -> pd.DataFrame:
    """One row per cell, ordered by layer, then latitude, then longitude."""
    records = []
    for layer, t in enumerate(grid.times):
        for r, lat in enumerate(grid.lats):
            for c, lon in enumerate(grid.lons):
                value = grid.values[layer, r, c]
                donor = grid.donor_ids[layer, r, c]
                records.append((float(lon), float(lat), t, value, donor))
    return pd.DataFrame(records, columns=GRID_COLUMNS)


def write_grid_csv(grid: InterpolationGrid, path: Union[str, Path]) -> None:
    """Write lon, lat, time_index, value, donor_id; cells without a donor have an empty value."""
    grid_frame(grid).to_csv(
        path, index=False, float_format="%.6f", na_rep="", lineterminator="\n"
    )


def write_grid_geojson(grid: InterpolationGrid, path: Union[str, Path]) -> None:
    """Write a FeatureCollection of cell polygons."""
    half = grid.cell_deg / 2.0
    features: List[Dict] = []
    for layer, t in enumerate(grid.times):
        for r, lat in enumerate(grid.lats):
            for c, lon in enumerate(grid.lons):
                value = grid.values[layer, r, c]
                ring = [
                    [round6(lon - half), round6(lat - half)],
                    [round6(lon + half), round6(lat - half)],
                    [round6(lon + half), round6(lat + half)],
                    [round6(lon - half), round6(lat + half)],
                    [round6(lon - half), round6(lat - half)],
                ]
                features.append(
                    {
                        "type": "Feature",
                        "geometry": {"type": "Polygon", "coordinates": [ring]},
                        "properties": {
                            "time_index": int(t),
                            "value": None if np.isnan(value) else round6(value),
                            "donor_id": grid.donor_ids[layer, r, c],
                        },
                    }
                )
    collection = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(collection) + "\n", encoding="utf-8")


def write_stir_tables_csv(tables: Dict[int, StirTable], path: Union[str, Path]) -> None:
    """Write every cluster's table, rows in table order."""
    records = [
        (cluster, row.r_h, row.r_tau, row.h_star, row.tau_star, row.density_at_max,
         table.h_span, table.tau_span)
        for cluster, table in sorted(tables.items())
        for row in table.rows
    ]
    frame = pd.DataFrame(records, columns=STIR_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def read_stir_tables_csv(path: Union[str, Path]) -> Dict[int, StirTable]:
    """Read tables written by write_stir_tables_csv, keyed by cluster index."""
    frame = pd.read_csv(path)
    tables: Dict[int, StirTable] = {}
    for cluster, group in frame.groupby("cluster", sort=True):
        rows = tuple(
            StirRow(
                r_h=float(rec.r_h),
                r_tau=float(rec.r_tau),
                h_star=float(rec.h_star),
                tau_star=float(rec.tau_star),
                density_at_max=float(rec.density_at_max),
            )
            for rec in group.itertuples(index=False)
        )
        first = group.iloc[0]
        tables[int(cluster)] = StirTable(
            rows=rows, h_span=float(first["h_span"]), tau_span=float(first["tau_span"])
        )
    return tables
