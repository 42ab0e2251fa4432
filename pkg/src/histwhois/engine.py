"""Answer (IP-or-prefix, date) queries against the sealed tries and the
AS2ORG timelines: most-specific match with a covering date range, walking
toward the root when the deeper ranges miss, then full result assembly.

Two wire schemas are produced from one result object:
  JSON-SHORT  (canonical)  {"IP", "QDATE", "results": {DATA_FIRST, DATA_LAST,
                            asns, prefix, as2org: [{ASN, ASNAME, RIR,
                            orgs: [{CC, RIR, ASORG}]}]}}
  JSON-VERBOSE (alternate) {"ipaddr", "qdate", "results": {timestamp, until,
                            prefix, aslist, orgmapping}}
A miss serializes as {"results": []}; a reserved prefix reports its label.
"""

from __future__ import annotations

import datetime
import ipaddress
import json
from dataclasses import dataclass, field

from .dates import day_int, format_day, parse_day
from .errors import QueryError
from .ingest import canonical_prefix
from .timeline import AsOrgDirectory
from .trie import TemporalTrie

FOUND = "found"
NOT_FOUND = "not_found"
RESERVED = "reserved"

JSON_SHORT = "json-short"
JSON_VERBOSE = "json-verbose"


@dataclass
class OrgView:
    org_id: str
    org_name: str | None
    country: str | None
    sources: tuple[str, ...] | None
    changed: datetime.date | None
    change_guessed: bool | None
    first_seen_snapshot: datetime.date | None
    dangling: bool


@dataclass
class AsOrgView:
    asn: int
    as_name: str | None
    source: str | None
    org_id: str | None
    opaque_id: str | None
    changed: datetime.date | None
    change_guessed: bool | None
    first_seen_snapshot: datetime.date | None
    orgs: list[OrgView] = field(default_factory=list)


@dataclass
class LookupResult:
    target: str
    qdate: datetime.date
    status: str
    prefix: str | None = None
    reserved_label: str | None = None
    data_first: datetime.date | None = None
    data_last: datetime.date | None = None
    asns: tuple[int, ...] = ()
    origin_kind: str | None = None
    as2org: list[AsOrgView] = field(default_factory=list)


@dataclass
class JoinedResult:
    """Union of per-date lookups, used for monthly-granularity comparisons."""

    target: str
    dates: tuple[datetime.date, ...]
    per_date: dict[datetime.date, LookupResult]
    status: str
    asns: tuple[int, ...]
    found_dates: tuple[datetime.date, ...]
    multi_state: bool


def parse_target(text: str) -> tuple[int, int, int, str]:
    """Parse an IP or prefix into (family, base int, plen, canonical text)."""
    text = text.strip()
    if not text:
        raise QueryError("empty query target")
    try:
        if "/" in text:
            base_text, _, len_text = text.partition("/")
            plen = int(len_text)
            prefix, base, family = canonical_prefix(base_text, plen)
            return family, base, plen, prefix
        addr = ipaddress.ip_address(text)
        family = 4 if addr.version == 4 else 6
        return family, int(addr), (32 if family == 4 else 128), str(addr)
    except ValueError as exc:
        raise QueryError(f"unparsable IP or prefix: {text!r}") from exc


def parse_qdate(text: str) -> datetime.date:
    try:
        return parse_day(text)
    except ValueError as exc:
        raise QueryError(f"bad date (want YYYYMMDD): {text!r}") from exc


class LookupEngine:
    """Read-only lookups over sealed tries plus built timelines."""

    def __init__(self, trie_v4: TemporalTrie, trie_v6: TemporalTrie,
                 directory: AsOrgDirectory):
        for trie in (trie_v4, trie_v6):
            if not trie.sealed:
                raise ValueError("lookup engine requires sealed tries")
        self.trie_v4 = trie_v4
        self.trie_v6 = trie_v6
        self.directory = directory
        dates = [d for d in (trie_v4.newest_date, trie_v6.newest_date) if d is not None]
        self.newest_date: datetime.date | None = max(dates) if dates else None

    def trie_for(self, family: int) -> TemporalTrie:
        return self.trie_v4 if family == 4 else self.trie_v6

    def _as2org_view(self, asn: int, qdate: datetime.date) -> AsOrgView:
        hit = self.directory.org_at(asn, qdate)
        if hit is None:
            return AsOrgView(asn, None, None, None, None, None, None, None)
        epoch, resolved = hit
        view = AsOrgView(
            asn=asn, as_name=epoch.as_name, source=epoch.source,
            org_id=epoch.org_ids[0] if epoch.org_ids else None,
            opaque_id=epoch.opaque_id, changed=epoch.valid_from,
            change_guessed=epoch.change_guessed,
            first_seen_snapshot=epoch.first_seen_snapshot)
        for org_id, org_epoch in resolved:
            if org_epoch is None:
                view.orgs.append(OrgView(org_id, None, None, None, None, None, None, True))
            else:
                view.orgs.append(OrgView(
                    org_id, org_epoch.org_name, org_epoch.country, org_epoch.sources,
                    org_epoch.valid_from, org_epoch.change_guessed,
                    org_epoch.first_seen_snapshot, False))
        return view

    def lookup(self, target: str, qdate: datetime.date | None = None) -> LookupResult:
        family, base, plen, canonical = parse_target(target)
        if qdate is None:
            qdate = self.newest_date
            if qdate is None:
                raise QueryError("no snapshot date available to default to")
        stack = self.trie_for(family).match_stack(base, plen)
        for record in reversed(stack):
            if record.reserved_label is not None:
                return LookupResult(canonical, qdate, RESERVED,
                                    prefix=record.prefix,
                                    reserved_label=record.reserved_label)
            epoch = record.epoch_at(qdate)
            if epoch is not None:
                return LookupResult(
                    canonical, qdate, FOUND, prefix=record.prefix,
                    data_first=epoch.first_seen, data_last=epoch.last_seen,
                    asns=epoch.origins, origin_kind=epoch.origin_kind,
                    as2org=[self._as2org_view(asn, qdate) for asn in epoch.origins])
        return LookupResult(canonical, qdate, NOT_FOUND)

    def lookup_joined(self, target: str, dates) -> JoinedResult:
        dates = tuple(sorted(dates))
        if not dates:
            raise QueryError("joined lookup needs at least one date")
        per_date = {d: self.lookup(target, d) for d in dates}
        found = [d for d in dates if per_date[d].status == FOUND]
        asns = tuple(sorted({asn for d in found for asn in per_date[d].asns}))
        states = {(per_date[d].prefix, per_date[d].asns) for d in found}
        status = FOUND if found else (
            RESERVED if any(r.status == RESERVED for r in per_date.values()) else NOT_FOUND)
        return JoinedResult(
            target=per_date[dates[0]].target,
            dates=dates, per_date=per_date, status=status, asns=asns,
            found_dates=tuple(found), multi_state=len(states) > 1)

    # -- status for banners and reports -------------------------------------

    @property
    def prefix_counts(self) -> tuple[int, int]:
        return self.trie_v4.record_count, self.trie_v6.record_count

    @property
    def as2org_counts(self) -> tuple[int, int]:
        return self.directory.as_count, self.directory.org_count


# -- serialization ----------------------------------------------------------

def to_json_short(result: LookupResult) -> dict:
    doc = {"IP": result.target, "QDATE": format_day(result.qdate)}
    if result.status == NOT_FOUND:
        doc["results"] = []
        return doc
    if result.status == RESERVED:
        doc["results"] = {"prefix": result.prefix, "reserved": result.reserved_label}
        return doc
    doc["results"] = {
        "DATA_FIRST": day_int(result.data_first),
        "DATA_LAST": day_int(result.data_last),
        "asns": list(result.asns),
        "prefix": result.prefix,
        "as2org": [
            {
                "ASN": view.asn,
                "ASNAME": view.as_name,
                "RIR": view.source,
                "orgs": [
                    {
                        "CC": org.country,
                        "RIR": ",".join(org.sources) if org.sources is not None else None,
                        "ASORG": org.org_name,
                    }
                    for org in view.orgs
                ],
            }
            for view in result.as2org
        ],
    }
    return doc


def to_json_verbose(result: LookupResult) -> dict:
    doc = {"ipaddr": result.target, "qdate": format_day(result.qdate)}
    if result.status == NOT_FOUND:
        doc["results"] = []
        return doc
    if result.status == RESERVED:
        doc["results"] = {"prefix": result.prefix, "reserved": result.reserved_label}
        return doc
    orgmapping = {}
    for view in result.as2org:
        orgs = []
        for org in view.orgs:
            org_obj = None
            if not org.dangling:
                org_obj = {
                    "org_id": org.org_id,
                    "org_name": org.org_name,
                    "country": org.country,
                    "source": ",".join(org.sources or ()),
                }
            orgs.append({
                "org_id": org.org_id,
                "org": org_obj,
                "seen": [format_day(org.first_seen_snapshot)] if org.first_seen_snapshot else [],
                "changed": format_day(org.first_seen_snapshot),
                "change_guessed": org.change_guessed,
            })
        orgmapping[str(view.asn)] = [{
            "asn": view.asn,
            "aut": {
                "aut": view.asn,
                "aut_name": view.as_name,
                "org_id": view.org_id,
                "opaque_id": view.opaque_id,
                "source": view.source,
            },
            "seen": [format_day(view.first_seen_snapshot)] if view.first_seen_snapshot else [],
            "changed": format_day(view.first_seen_snapshot),
            "change_guessed": view.change_guessed,
            "orgs": orgs,
        }]
    doc["results"] = {
        "timestamp": day_int(result.data_first),
        "until": day_int(result.data_last),
        "prefix": result.prefix,
        "aslist": list(result.asns),
        "orgmapping": orgmapping,
    }
    return doc


def render_result(result: LookupResult, output_format: str = JSON_SHORT,
                  pretty: bool = False) -> str:
    """One lookup result as a JSON string; compact single-line unless pretty."""
    if output_format == JSON_VERBOSE:
        doc = to_json_verbose(result)
    elif output_format == JSON_SHORT:
        doc = to_json_short(result)
    else:
        raise ValueError(f"unknown output format: {output_format!r}")
    if pretty:
        return json.dumps(doc, indent=4)
    return json.dumps(doc)
