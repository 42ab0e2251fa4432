"""Exception types shared across the package."""


class HistWhoisError(Exception):
    """Base class for all histwhois errors."""


class IngestError(HistWhoisError):
    """A single input file could not be ingested (undecodable, unknown format)."""


class BuildError(HistWhoisError):
    """The index build cannot proceed (replay contract violated, no usable input)."""


class SnapshotError(HistWhoisError):
    """A persisted snapshot is unreadable: bad version, checksum, or structure."""


class QueryError(HistWhoisError):
    """A query target or date is malformed. Distinct from a not-found answer."""
