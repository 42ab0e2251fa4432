"""histwhois: date-aware IP-to-AS/organization attribution.

Builds an in-memory temporal prefix index from daily prefix-to-AS
aggregates and quarterly AS-to-organization snapshots, answers
(IP-or-prefix, date) lookups, and serves them over a whois-style TCP
line protocol with JSON output.
"""

from .engine import (
    FOUND, JSON_SHORT, JSON_VERBOSE, NOT_FOUND, RESERVED,
    LookupEngine, LookupResult, render_result, to_json_short, to_json_verbose,
)
from .errors import (
    BuildError, HistWhoisError, IngestError, QueryError, SnapshotError,
)
from .ingest import FilterPolicy, Pfx2AsLine, apply_filter, parse_as2org, parse_pfx2as
from .server import ServerConfig, WhoisServer, WhoisService
from .snapshot import BuildConfig, build_index, load_snapshot, save_snapshot
from .timeline import AsOrgDirectory, build_timelines
from .trie import AttributionEpoch, PrefixRecord, TemporalTrie

__version__ = "0.1.0"

__all__ = [
    "AsOrgDirectory", "AttributionEpoch", "BuildConfig", "BuildError",
    "FilterPolicy", "FOUND", "HistWhoisError", "IngestError", "JSON_SHORT",
    "JSON_VERBOSE", "LookupEngine", "LookupResult", "NOT_FOUND",
    "Pfx2AsLine", "PrefixRecord", "QueryError", "RESERVED", "ServerConfig",
    "SnapshotError", "TemporalTrie", "WhoisServer", "WhoisService",
    "apply_filter", "build_index", "build_timelines", "load_snapshot",
    "parse_as2org", "parse_pfx2as", "render_result", "save_snapshot",
    "to_json_short", "to_json_verbose",
]
