"""Discovery and parsing of daily prefix-to-AS aggregates and quarterly
AS-to-organization files, plus the noise filter applied before anything
reaches the trie.

pfx2as files are tab-separated `base<TAB>len<TAB>origins`; origin fields
use `_` between MOAS members and `,` between AS-set members, and may use
legacy asdot notation ("X.Y" = X*65536+Y). AS2ORG files come either in the
pipe-delimited two-section form (with `# format:` header comments) or as
one JSON object per line; the format is sniffed from the first non-empty
line, gzip from the magic bytes.
"""

from __future__ import annotations

import datetime
import gzip
import io
import ipaddress
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .dates import day_from_name, format_day
from .errors import IngestError
from .reserved import RESERVED_ASN_RANGES, SPECIAL_USE_PREFIXES, MAX_ASN

log = logging.getLogger(__name__)

# discover_files kinds
PFX2AS_V4 = "pfx2as-v4"
PFX2AS_V6 = "pfx2as-v6"
AS2ORG = "as2org"

# origin kinds
SINGLE = "single"
MOAS = "moas"
AS_SET = "as_set"

# filter reject reasons
TOO_SPECIFIC = "too_specific"
TOO_BROAD = "too_broad"
RESERVED_ASN = "reserved_asn"

GZIP_MAGIC = b"\x1f\x8b"


@dataclass(frozen=True)
class Pfx2AsLine:
    """One accepted-or-not prefix announcement line from a daily aggregate."""

    prefix: str                 # canonical "1.1.1.0/24"
    base: int                   # network address as integer
    plen: int
    family: int                 # 4 or 6
    origins: tuple[int, ...]    # sorted ascending, non-empty
    origin_kind: str            # single | moas | as_set
    snapshot_date: datetime.date


@dataclass(frozen=True)
class AsEntry:
    asn: int
    as_name: str
    org_id: str
    opaque_id: str
    source: str


@dataclass(frozen=True)
class OrgEntry:
    org_id: str
    org_name: str
    country: str
    sources: tuple[str, ...]


@dataclass
class As2OrgFileSnapshot:
    collection_date: datetime.date
    as_entries: list[AsEntry]
    org_entries: list[OrgEntry]
    malformed: int = 0
    total: int = 0

    def org_index(self) -> dict[str, OrgEntry]:
        index: dict[str, OrgEntry] = {}
        for entry in self.org_entries:
            if entry.org_id in index:
                prev = index[entry.org_id]
                merged = tuple(sorted(set(prev.sources) | set(entry.sources)))
                index[entry.org_id] = OrgEntry(prev.org_id, prev.org_name, prev.country, merged)
            else:
                index[entry.org_id] = entry
        return index

    def dangling_org_ids(self) -> set[str]:
        """org_ids referenced by AS entries but absent from the org section."""
        known = {entry.org_id for entry in self.org_entries}
        return {entry.org_id for entry in self.as_entries if entry.org_id not in known}


@dataclass(frozen=True)
class FilterPolicy:
    v4_min_len: int = 8
    v4_max_len: int = 24
    v6_min_len: int = 18
    v6_max_len: int = 48
    reserved_asn_ranges: tuple[tuple[int, int], ...] = RESERVED_ASN_RANGES
    reserved_prefixes: tuple[tuple[str, str], ...] = SPECIAL_USE_PREFIXES

    def bounds(self, family: int) -> tuple[int, int]:
        if family == 4:
            return self.v4_min_len, self.v4_max_len
        return self.v6_min_len, self.v6_max_len

    def asn_reserved(self, asn: int) -> bool:
        for low, high in self.reserved_asn_ranges:
            if low <= asn <= high:
                return True
        return False


def apply_filter(line: Pfx2AsLine, policy: FilterPolicy) -> str | None:
    """None to accept, otherwise one of the reject reason constants."""
    lo, hi = policy.bounds(line.family)
    if line.plen > hi:
        return TOO_SPECIFIC
    if line.plen < lo:
        return TOO_BROAD
    for asn in line.origins:
        if policy.asn_reserved(asn):
            return RESERVED_ASN
    return None


def parse_asn(token: str) -> int:
    """asplain or asdot ("X.Y" = X*65536+Y) to an int; ValueError if neither."""
    token = token.strip()
    if "." in token:
        high_s, _, low_s = token.partition(".")
        high, low = int(high_s), int(low_s)
        if not (0 <= high <= 65535 and 0 <= low <= 65535):
            raise ValueError(f"asdot part out of range: {token!r}")
        return high * 65536 + low
    asn = int(token)
    if not 0 <= asn <= MAX_ASN:
        raise ValueError(f"ASN out of range: {token!r}")
    return asn


def parse_origins(fieldtext: str) -> tuple[tuple[int, ...], str]:
    """Split an origin descriptor into (sorted ASN tuple, origin kind)."""
    fieldtext = fieldtext.strip()
    if not fieldtext:
        raise ValueError("empty origin field")
    if "," in fieldtext:
        kind = AS_SET
        tokens = [t for part in fieldtext.split(",") for t in part.split("_")]
    elif "_" in fieldtext:
        kind = MOAS
        tokens = fieldtext.split("_")
    else:
        kind = SINGLE
        tokens = [fieldtext]
    origins = tuple(sorted({parse_asn(t) for t in tokens if t.strip()}))
    if not origins:
        raise ValueError(f"no ASN in origin field: {fieldtext!r}")
    if kind != AS_SET and len(origins) == 1:
        kind = SINGLE
    elif kind == SINGLE and len(origins) > 1:
        kind = MOAS
    return origins, kind


def canonical_prefix(base_text: str, plen: int) -> tuple[str, int, int]:
    """Normalize base/len to (prefix string, base int, family); host bits masked."""
    addr = ipaddress.ip_address(base_text.strip())
    family = 4 if addr.version == 4 else 6
    width = 32 if family == 4 else 128
    if not 0 <= plen <= width:
        raise ValueError(f"prefix length {plen} out of range for IPv{family}")
    base = int(addr)
    if plen < width:
        base &= ~((1 << (width - plen)) - 1) & ((1 << width) - 1)
    network = ipaddress.ip_network((base, plen))
    return str(network), base, family


def _decode_stream(stream, what: str) -> str:
    """Read a binary stream (or bytes) as UTF-8 text, sniffing gzip."""
    if isinstance(stream, (bytes, bytearray)):
        raw = bytes(stream)
    else:
        raw = stream.read()
        if isinstance(raw, str):
            return raw
    if raw[:2] == GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except OSError as exc:
            raise IngestError(f"{what}: corrupt gzip stream: {exc}") from exc
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{what}: undecodable byte stream: {exc}") from exc


@dataclass
class ParsedPfx2As:
    lines: list[Pfx2AsLine]
    malformed: int
    total: int


def parse_pfx2as(stream, snapshot_date: datetime.date) -> ParsedPfx2As:
    """Parse one daily aggregate. Malformed lines are counted and skipped;
    an undecodable stream raises IngestError (file skipped, build continues)."""
    text = _decode_stream(stream, f"pfx2as {format_day(snapshot_date)}")
    lines: list[Pfx2AsLine] = []
    malformed = 0
    total = 0
    for raw in text.splitlines():
        if not raw.strip():
            continue
        total += 1
        parts = raw.split("\t")
        if len(parts) != 3:
            parts = raw.split()
        if len(parts) != 3:
            malformed += 1
            continue
        base_text, len_text, origin_text = parts
        try:
            plen = int(len_text)
            prefix, base, family = canonical_prefix(base_text, plen)
            origins, kind = parse_origins(origin_text)
        except ValueError:
            malformed += 1
            continue
        lines.append(Pfx2AsLine(prefix, base, plen, family, origins, kind, snapshot_date))
    return ParsedPfx2As(lines=lines, malformed=malformed, total=total)


# Column aliases seen across pipe-format eras and the JSON-lines form.
_AS_NAME_KEYS = ("aut_name", "name", "as_name")
_ORG_NAME_KEYS = ("org_name", "name")
_OPAQUE_KEYS = ("opaque_id", "opaqueId")
_ORG_ID_KEYS = ("org_id", "organizationId")


def _split_sources(text: str) -> tuple[str, ...]:
    return tuple(sorted({s.strip() for s in text.split(",") if s.strip()}))


def _rejoin_overflow(fields: list[str], columns: list[str]) -> list[str]:
    """Stray pipes sit in the free-text name column; fold the overflow back
    into it so the surrounding columns stay aligned."""
    name_idx = next((i for i, c in enumerate(columns)
                     if c in _AS_NAME_KEYS or c in _ORG_NAME_KEYS), None)
    if name_idx is None:
        return fields[:len(columns)]
    tail = len(columns) - name_idx - 1
    rejoined = "|".join(fields[name_idx:len(fields) - tail])
    return fields[:name_idx] + [rejoined] + fields[len(fields) - tail:]


def _parse_as2org_pipe(text: str, snapshot: As2OrgFileSnapshot) -> None:
    section = None  # "as" | "org"
    columns: list[str] | None = None

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = line.lstrip("#").strip().lower()
            if header.startswith("format:"):
                declared = [c.strip() for c in header[len("format:"):].split("|")]
                if declared and declared[0] in ("aut", "asn"):
                    section, columns = "as", declared
                elif declared and declared[0] == "org_id":
                    section, columns = "org", declared
            continue
        snapshot.total += 1
        fields = line.split("|")
        if columns is not None and len(fields) > len(columns):
            fields = _rejoin_overflow(fields, columns)
        sec, cols = section, columns
        if sec is None:
            # No format headers: aut lines start with a numeric ASN.
            if fields[0].strip().isdigit():
                sec = "as"
                cols = (["aut", "changed", "aut_name", "org_id", "opaque_id", "source"]
                        if len(fields) >= 6 else ["aut", "changed", "aut_name", "org_id", "source"])
            else:
                sec = "org"
                cols = ["org_id", "changed", "org_name", "country", "source"]
        if cols is None or len(fields) < len(cols):
            snapshot.malformed += 1
            continue
        record = dict(zip(cols, fields))
        try:
            if sec == "as":
                asn = int(record.get("aut", record.get("asn", "")).strip())
                name = next((record[k] for k in _AS_NAME_KEYS if k in record), "")
                opaque = next((record[k] for k in _OPAQUE_KEYS if k in record), "")
                snapshot.as_entries.append(AsEntry(
                    asn=asn,
                    as_name=name.strip(),
                    org_id=record.get("org_id", "").strip(),
                    opaque_id=opaque.strip(),
                    source=record.get("source", "").strip(),
                ))
            else:
                org_id = record.get("org_id", "").strip()
                if not org_id:
                    raise ValueError("empty org_id")
                name = next((record[k] for k in _ORG_NAME_KEYS if k in record), "")
                snapshot.org_entries.append(OrgEntry(
                    org_id=org_id,
                    org_name=name.strip(),
                    country=record.get("country", "").strip(),
                    sources=_split_sources(record.get("source", "")),
                ))
        except ValueError:
            snapshot.malformed += 1


def _parse_as2org_jsonl(text: str, snapshot: As2OrgFileSnapshot) -> None:
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        snapshot.total += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            snapshot.malformed += 1
            continue
        if not isinstance(obj, dict):
            snapshot.malformed += 1
            continue
        kind = str(obj.get("type", "")).lower()
        try:
            if kind in ("as", "asn") or (not kind and ("asn" in obj or "aut" in obj)):
                asn = int(obj.get("asn", obj.get("aut")))
                snapshot.as_entries.append(AsEntry(
                    asn=asn,
                    as_name=str(next((obj[k] for k in _AS_NAME_KEYS if k in obj), "")),
                    org_id=str(next((obj[k] for k in _ORG_ID_KEYS if k in obj), "")),
                    opaque_id=str(next((obj[k] for k in _OPAQUE_KEYS if k in obj), "")),
                    source=str(obj.get("source", "")),
                ))
            elif kind in ("org", "organization") or (not kind and any(k in obj for k in _ORG_ID_KEYS)):
                org_id = str(next((obj[k] for k in _ORG_ID_KEYS if k in obj), ""))
                if not org_id:
                    raise ValueError("empty org_id")
                source = obj.get("source", "")
                if isinstance(source, (list, tuple)):
                    sources = tuple(sorted({str(s) for s in source}))
                else:
                    sources = _split_sources(str(source))
                snapshot.org_entries.append(OrgEntry(
                    org_id=org_id,
                    org_name=str(next((obj[k] for k in _ORG_NAME_KEYS if k in obj), "")),
                    country=str(obj.get("country", "")),
                    sources=sources,
                ))
            else:
                snapshot.malformed += 1
        except (TypeError, ValueError):
            snapshot.malformed += 1


def parse_as2org(stream, collection_date: datetime.date) -> As2OrgFileSnapshot:
    """Parse one quarterly AS2ORG file (pipe two-section or JSON-lines)."""
    text = _decode_stream(stream, f"as2org {format_day(collection_date)}")
    snapshot = As2OrgFileSnapshot(collection_date, [], [])
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    if first.lstrip().startswith("{"):
        _parse_as2org_jsonl(text, snapshot)
    elif "|" in text:
        _parse_as2org_pipe(text, snapshot)
    else:
        raise IngestError(
            f"as2org {format_day(collection_date)}: neither pipe-delimited nor JSON-lines format detected")
    return snapshot


def discover_files(root_path, kind: str) -> list[tuple[datetime.date, Path]]:
    """List data files under root_path with dates parsed from the file names.

    Sorted ascending by date; duplicate dates keep the lexicographically last
    name; undateable names are skipped with a warning.
    """
    root = Path(root_path)
    by_date: dict[datetime.date, Path] = {}
    for path in sorted(root.iterdir()):
        if not path.is_file():
            continue
        name = path.name
        # Soft family split for mixed CAIDA-style directories.
        if kind == PFX2AS_V4 and "rv6" in name:
            continue
        if kind == PFX2AS_V6 and "rv2" in name:
            continue
        day = day_from_name(name)
        if day is None:
            log.warning("skipping %s file with undateable name: %s", kind, name)
            continue
        current = by_date.get(day)
        if current is None or name > current.name:
            by_date[day] = path
    return sorted(by_date.items())


@dataclass
class FileReport:
    """Per-file ingest outcome for the build report."""

    name: str
    kind: str
    snapshot_date: datetime.date | None
    total: int = 0
    accepted: int = 0
    malformed: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    error: str | None = None

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())


@dataclass
class BuildReport:
    files: list[FileReport] = field(default_factory=list)

    @property
    def failed_files(self) -> list[FileReport]:
        return [f for f in self.files if f.error]

    def as_text(self) -> str:
        out = io.StringIO()
        out.write("file\tkind\tdate\ttotal\taccepted\trejected\tmalformed\terror\n")
        for f in self.files:
            out.write("\t".join([
                f.name, f.kind, format_day(f.snapshot_date) or "-",
                str(f.total), str(f.accepted), str(f.rejected_total),
                str(f.malformed), f.error or "-",
            ]) + "\n")
        reasons: dict[str, int] = {}
        for f in self.files:
            for reason, count in f.rejected.items():
                reasons[reason] = reasons.get(reason, 0) + count
        out.write("# totals: files=%d failed=%d accepted=%d malformed=%d\n" % (
            len(self.files), len(self.failed_files),
            sum(f.accepted for f in self.files), sum(f.malformed for f in self.files)))
        for reason in sorted(reasons):
            out.write(f"# rejected[{reason}]={reasons[reason]}\n")
        return out.getvalue()
