"""Timezone utilities for run-manifest timestamps.

Manifests record when a stage started in the configured timezone. The
zone database comes from the system or, where absent, from tzdata.
"""

from datetime import datetime
from typing import Optional
from zoneinfo import ZoneInfo

ISO_FORMAT = "%Y-%m-%dT%H:%M:%S%z"


def get_timezone(timezone_name: str) -> ZoneInfo:
    """Get timezone object from name.

    Raises:
        ZoneInfoNotFoundError: If timezone name is invalid

    Examples:
        >>> get_timezone("Asia/Kolkata").key
        'Asia/Kolkata'
    """
    return ZoneInfo(timezone_name)


def get_current_time(timezone: Optional[ZoneInfo] = None) -> datetime:
    """Current time in the given timezone (UTC if None)."""
    if timezone is None:
        return datetime.now(ZoneInfo("UTC"))
    return datetime.now(timezone)


def format_timestamp(
    dt: Optional[datetime] = None,
    timezone: Optional[ZoneInfo] = None,
    fmt: str = ISO_FORMAT,
) -> str:
    """Format a datetime, by default as ISO 8601 with UTC offset.

    Naive datetimes are taken to be in `timezone`; aware ones are
    converted to it.

    Examples:
        >>> format_timestamp(datetime(2019, 11, 1, 12, 0), get_timezone("Asia/Kolkata"))
        '2019-11-01T12:00:00+0530'
    """
    if dt is None:
        dt = get_current_time(timezone)
    elif timezone is not None:
        dt = dt.replace(tzinfo=timezone) if dt.tzinfo is None else dt.astimezone(timezone)

    return dt.strftime(fmt)


def get_timestamp_string(timezone_name: Optional[str] = None) -> str:
    """Current ISO timestamp in the named timezone (UTC if None)."""
    timezone = get_timezone(timezone_name) if timezone_name else None
    return format_timestamp(timezone=timezone)
