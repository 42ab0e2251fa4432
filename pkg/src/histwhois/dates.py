"""YYYYMMDD day handling.

All dates in input file names, queries, and the wire format are compact
YYYYMMDD strings (or ints); internally everything is datetime.date.
"""

from __future__ import annotations

import datetime
import re

ONE_DAY = datetime.timedelta(days=1)

_DAY_RUN = re.compile(r"\d{8}")


def parse_day(value: str | int) -> datetime.date:
    """Parse a YYYYMMDD string or int into a date. Raises ValueError."""
    text = str(value).strip()
    if len(text) != 8 or not text.isdigit():
        raise ValueError(f"not a YYYYMMDD day: {value!r}")
    return datetime.date(int(text[0:4]), int(text[4:6]), int(text[6:8]))


def format_day(day: datetime.date | None) -> str | None:
    if day is None:
        return None
    return f"{day.year:04d}{day.month:02d}{day.day:02d}"


def day_int(day: datetime.date | None) -> int | None:
    """YYYYMMDD as an int, as used by the JSON first/last-seen fields."""
    if day is None:
        return None
    return day.year * 10000 + day.month * 100 + day.day


def day_from_name(name: str) -> datetime.date | None:
    """First 8-digit run in a file name that parses as a valid calendar day."""
    for match in _DAY_RUN.finditer(name):
        try:
            return parse_day(match.group(0))
        except ValueError:
            continue
    return None
