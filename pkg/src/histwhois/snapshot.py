"""End-to-end index builds (discover -> parse -> filter -> timelines ->
replay -> seed -> finalize) and the versioned, checksummed snapshot file
that avoids repeating them.

Snapshot layout: gzip(header line + JSON payload). The header is a small
JSON object carrying the format version and the sha256 of the payload
bytes; identical inputs produce byte-identical snapshots (gzip mtime is
pinned to zero and all collections are serialized in sorted order).
"""

from __future__ import annotations

import datetime
import gzip
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .dates import day_int, parse_day
from .errors import BuildError, IngestError, SnapshotError
from .ingest import (
    AS2ORG, PFX2AS_V4, PFX2AS_V6,
    BuildReport, FileReport, FilterPolicy,
    apply_filter, canonical_prefix, discover_files, parse_as2org, parse_pfx2as,
)
from .engine import LookupEngine
from .timeline import AsOrgDirectory, AsOrgEpoch, OrgEpoch, build_timelines
from .trie import AttributionEpoch, TemporalTrie

log = logging.getLogger(__name__)

FORMAT_NAME = "histwhois-snapshot"
FORMAT_VERSION = 1


@dataclass
class BuildConfig:
    pfx2as_v4: Path | str | None = None
    pfx2as_v6: Path | str | None = None
    as2org: Path | str | None = None
    policy: FilterPolicy = FilterPolicy()
    start: datetime.date | None = None
    end: datetime.date | None = None


@dataclass
class BuiltIndex:
    trie_v4: TemporalTrie
    trie_v6: TemporalTrie
    directory: AsOrgDirectory
    meta: dict
    report: BuildReport

    def engine(self) -> LookupEngine:
        return LookupEngine(self.trie_v4, self.trie_v6, self.directory)


def _in_range(day, start, end) -> bool:
    return (start is None or day >= start) and (end is None or day <= end)


def build_index(config: BuildConfig) -> BuiltIndex:
    """Build the full in-memory index from raw data directories."""
    if config.start is not None and config.end is not None and config.start > config.end:
        raise BuildError(f"empty date range: {config.start}..{config.end}")

    report = BuildReport()
    policy = config.policy

    pfx_files: list[tuple[datetime.date, Path, str]] = []
    for root, kind in ((config.pfx2as_v4, PFX2AS_V4), (config.pfx2as_v6, PFX2AS_V6)):
        if root is None:
            continue
        for day, path in discover_files(root, kind):
            if _in_range(day, config.start, config.end):
                pfx_files.append((day, path, kind))
    if not pfx_files:
        raise BuildError("zero usable pfx2as files in the configured range")
    pfx_files.sort(key=lambda item: (item[0], item[2], item[1].name))

    if config.as2org is None:
        raise BuildError("an AS2ORG directory is required")
    as2org_files = discover_files(config.as2org, AS2ORG)
    snapshots = []
    for day, path in as2org_files:
        entry = FileReport(name=path.name, kind=AS2ORG, snapshot_date=day)
        report.files.append(entry)
        try:
            with open(path, "rb") as handle:
                snap = parse_as2org(handle, day)
        except (IngestError, OSError) as exc:
            entry.error = str(exc)
            log.warning("skipping as2org file %s: %s", path.name, exc)
            continue
        entry.total = snap.total
        entry.accepted = len(snap.as_entries) + len(snap.org_entries)
        entry.malformed = snap.malformed
        snapshots.append(snap)
    if not snapshots:
        raise BuildError("no AS2ORG snapshot could be parsed")
    directory = build_timelines(snapshots)

    tries = {4: TemporalTrie(4), 6: TemporalTrie(6)}
    kind_newest: dict[str, datetime.date] = {}
    for day, path, kind in pfx_files:
        entry = FileReport(name=path.name, kind=kind, snapshot_date=day)
        report.files.append(entry)
        try:
            with open(path, "rb") as handle:
                parsed = parse_pfx2as(handle, day)
        except (IngestError, OSError) as exc:
            entry.error = str(exc)
            log.warning("skipping pfx2as file %s: %s", path.name, exc)
            continue
        entry.total = parsed.total
        entry.malformed = parsed.malformed
        for line in parsed.lines:
            reason = apply_filter(line, policy)
            if reason is not None:
                entry.rejected[reason] = entry.rejected.get(reason, 0) + 1
                continue
            entry.accepted += 1
            tries[line.family].insert_day(line)
        kind_newest[kind] = max(kind_newest.get(kind, day), day)

    for family, kind in ((4, PFX2AS_V4), (6, PFX2AS_V6)):
        trie = tries[family]
        trie.seed_reserved(policy.reserved_prefixes)
        candidates = [d for d in (kind_newest.get(kind), trie.last_replayed) if d is not None]
        trie.finalize(max(candidates) if candidates else None)

    meta = {
        "source_files": {
            kind: sorted(f.name for f in report.files if f.kind == kind)
            for kind in (PFX2AS_V4, PFX2AS_V6, AS2ORG)
        },
        "date_span": {
            "pfx2as_first": day_int(min(d for d, _, _ in pfx_files)),
            "pfx2as_last": day_int(max(d for d, _, _ in pfx_files)),
            "as2org_first": day_int(snapshots[0].collection_date),
            "as2org_last": day_int(snapshots[-1].collection_date),
        },
        "policy": _policy_to_doc(policy),
        "counts": {
            "v4_prefixes": tries[4].record_count,
            "v6_prefixes": tries[6].record_count,
            "as_timelines": directory.as_count,
            "org_timelines": directory.org_count,
        },
    }
    return BuiltIndex(tries[4], tries[6], directory, meta, report)


# -- serialization ----------------------------------------------------------

def _policy_to_doc(policy: FilterPolicy) -> dict:
    return {
        "v4_min_len": policy.v4_min_len, "v4_max_len": policy.v4_max_len,
        "v6_min_len": policy.v6_min_len, "v6_max_len": policy.v6_max_len,
        "reserved_asn_ranges": [list(r) for r in policy.reserved_asn_ranges],
        "reserved_prefixes": [list(p) for p in policy.reserved_prefixes],
    }


def _policy_from_doc(doc: dict) -> FilterPolicy:
    return FilterPolicy(
        v4_min_len=doc["v4_min_len"], v4_max_len=doc["v4_max_len"],
        v6_min_len=doc["v6_min_len"], v6_max_len=doc["v6_max_len"],
        reserved_asn_ranges=tuple(tuple(r) for r in doc["reserved_asn_ranges"]),
        reserved_prefixes=tuple(tuple(p) for p in doc["reserved_prefixes"]),
    )


def _trie_to_doc(trie: TemporalTrie) -> list:
    records = []
    for record in trie.iter_records():
        epochs = [[day_int(e.first_seen), day_int(e.last_seen), e.origin_kind,
                   list(e.origins)] for e in record.epochs]
        records.append([record.prefix, record.reserved_label, epochs])
    return records


def _trie_from_doc(family: int, records: list, newest: int | None) -> TemporalTrie:
    trie = TemporalTrie(family)
    for prefix_text, reserved_label, epoch_docs in records:
        base_text, _, len_text = prefix_text.partition("/")
        plen = int(len_text)
        prefix, base, fam = canonical_prefix(base_text, plen)
        if fam != family:
            raise SnapshotError(f"family mismatch for {prefix_text}")
        epochs = [AttributionEpoch(parse_day(first), parse_day(last) if last else None,
                                   tuple(origins), kind)
                  for first, last, kind, origins in epoch_docs]
        trie.insert_record(prefix, base, plen, epochs, reserved_label)
    trie.newest_date = parse_day(newest) if newest else None
    trie.sealed = True
    return trie


def _directory_to_doc(directory: AsOrgDirectory) -> dict:
    as_doc = {
        str(asn): [[day_int(e.valid_from), day_int(e.valid_to), e.as_name, e.source,
                    list(e.org_ids), e.opaque_id, e.change_guessed,
                    day_int(e.first_seen_snapshot)] for e in epochs]
        for asn, epochs in directory.as_timelines.items()
    }
    org_doc = {
        org_id: [[day_int(e.valid_from), day_int(e.valid_to), e.org_name, e.country,
                  list(e.sources), e.change_guessed, day_int(e.first_seen_snapshot)]
                 for e in epochs]
        for org_id, epochs in directory.org_timelines.items()
    }
    return {
        "as_timelines": as_doc,
        "org_timelines": org_doc,
        "snapshot_dates": [day_int(d) for d in directory.snapshot_dates],
    }


def _directory_from_doc(doc: dict) -> AsOrgDirectory:
    as_timelines = {
        int(asn): [AsOrgEpoch(int(asn), parse_day(vf), parse_day(vt) if vt else None,
                              name, source, tuple(org_ids), opaque, guessed,
                              parse_day(first_snap))
                   for vf, vt, name, source, org_ids, opaque, guessed, first_snap in epochs]
        for asn, epochs in doc["as_timelines"].items()
    }
    org_timelines = {
        org_id: [OrgEpoch(org_id, parse_day(vf), parse_day(vt) if vt else None,
                          name, country, tuple(sources), guessed, parse_day(first_snap))
                 for vf, vt, name, country, sources, guessed, first_snap in epochs]
        for org_id, epochs in doc["org_timelines"].items()
    }
    dates = tuple(parse_day(d) for d in doc["snapshot_dates"])
    return AsOrgDirectory(as_timelines, org_timelines, dates)


def save_snapshot(built: BuiltIndex, path: Path | str) -> str:
    """Write the sealed index to path; returns the payload sha256 hex digest."""
    payload_doc = {
        "meta": built.meta,
        "newest": {"v4": day_int(built.trie_v4.newest_date),
                   "v6": day_int(built.trie_v6.newest_date)},
        "tries": {"v4": _trie_to_doc(built.trie_v4), "v6": _trie_to_doc(built.trie_v6)},
        "directory": _directory_to_doc(built.directory),
    }
    payload = json.dumps(payload_doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    digest = hashlib.sha256(payload).hexdigest()
    header = json.dumps({"format": FORMAT_NAME, "version": FORMAT_VERSION,
                         "sha256": digest}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        # pin the embedded name and mtime so identical inputs give identical bytes
        with gzip.GzipFile(filename="", fileobj=handle, mode="wb", mtime=0) as gz:
            gz.write(header + b"\n" + payload)
    return digest


def load_snapshot(path: Path | str) -> BuiltIndex:
    """Load a snapshot; refuses version mismatches and checksum failures."""
    try:
        with gzip.open(path, "rb") as handle:
            blob = handle.read()
    except (OSError, EOFError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    header_bytes, sep, payload = blob.partition(b"\n")
    if not sep:
        raise SnapshotError("snapshot is truncated: no header/payload separator")
    try:
        header = json.loads(header_bytes)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot header is not JSON: {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise SnapshotError(f"not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise SnapshotError(
            f"snapshot version {header.get('version')} unsupported (want {FORMAT_VERSION})")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("sha256"):
        raise SnapshotError("snapshot checksum mismatch; file is corrupt")
    doc = json.loads(payload)
    trie_v4 = _trie_from_doc(4, doc["tries"]["v4"], doc["newest"]["v4"])
    trie_v6 = _trie_from_doc(6, doc["tries"]["v6"], doc["newest"]["v6"])
    directory = _directory_from_doc(doc["directory"])
    return BuiltIndex(trie_v4, trie_v6, directory, doc["meta"], BuildReport())
