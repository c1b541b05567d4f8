"""Formatting utilities for reports and exports.

Every number that leaves the pipeline is written with a fixed number of
decimals (6 by default) and a dot separator, independent of locale, so
that repeated runs produce identical bytes.
"""

import math
from typing import Iterable, Optional, Sequence

EXPORT_DECIMALS = 6


def round6(value: float) -> float:
    """Round to the export precision.

    Examples:
        >>> round6(1.23456789)
        1.234568
    """
    return round(float(value), EXPORT_DECIMALS)


def format_fixed(value: Optional[float], decimals: int = EXPORT_DECIMALS) -> str:
    """Format a number with fixed decimals; None and NaN become "nan".

    Examples:
        >>> format_fixed(0.4871)
        '0.487100'
        >>> format_fixed(-29.816723, decimals=2)
        '-29.82'
    """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    text = f"{value:.{decimals}f}"
    # avoid "-0.000000"
    if float(text) == 0.0:
        text = f"{0.0:.{decimals}f}"
    return text


def format_params(names: Sequence[str], values: Iterable[float]) -> str:
    """Format named parameters as "name=value" pairs joined by "; ".

    Examples:
        >>> format_params(["shape", "scale"], [4.8763, 1.829])
        'shape=4.876300; scale=1.829000'
    """
    return "; ".join(f"{n}={format_fixed(v)}" for n, v in zip(names, values))


def format_distance(meters: float) -> str:
    """Format a distance in kilometres with 3 decimals.

    Examples:
        >>> format_distance(18026.0)
        '18.026 km'
    """
    if math.isinf(meters):
        return "inf km"
    return f"{meters / 1000.0:.3f} km"


def format_duration(seconds: float) -> str:
    """Format a wall time as seconds with 3 decimals.

    Examples:
        >>> format_duration(1.23456)
        '1.235 s'
    """
    return f"{seconds:.3f} s"
