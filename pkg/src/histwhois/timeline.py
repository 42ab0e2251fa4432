"""Continuous per-ASN and per-organization timelines interpolated from the
ordered quarterly AS2ORG snapshots.

Between two adjacent snapshots d1 < d2 there are four cases:
  unchanged        -> one epoch spans through both (merged, no boundary)
  removed at d2    -> epoch closes at d1 (gone from d1+1 onward)
  added at d2      -> new epoch opens at d2, not guessed
  changed at d2    -> old epoch closes at d1, new epoch opens at d1+1, guessed
Entries in the last snapshot stay open (valid_to = None).
"""

from __future__ import annotations

import datetime
from bisect import bisect_right
from dataclasses import dataclass

from .dates import ONE_DAY
from .errors import BuildError
from .ingest import As2OrgFileSnapshot


@dataclass(frozen=True)
class Organization:
    org_id: str
    org_name: str
    country: str
    sources: tuple[str, ...]


@dataclass(frozen=True)
class AsOrgEpoch:
    asn: int
    valid_from: datetime.date
    valid_to: datetime.date | None
    as_name: str
    source: str
    org_ids: tuple[str, ...]
    opaque_id: str
    change_guessed: bool
    first_seen_snapshot: datetime.date


@dataclass(frozen=True)
class OrgEpoch:
    org_id: str
    valid_from: datetime.date
    valid_to: datetime.date | None
    org_name: str
    country: str
    sources: tuple[str, ...]
    change_guessed: bool
    first_seen_snapshot: datetime.date

    def organization(self) -> Organization:
        return Organization(self.org_id, self.org_name, self.country, self.sources)


def _interpolate(dated_maps):
    """Generic four-case interpolation.

    dated_maps: ordered list of (collection_date, {key: (eq_value, payload)}).
    Returns {key: [(valid_from, valid_to, payload, change_guessed, first_seen_snapshot)]}.
    The eq_value decides sameness; the payload of the first snapshot of each
    epoch is what the epoch carries.
    """
    timelines: dict = {}
    open_epochs: dict = {}  # key -> [valid_from, eq, payload, guessed, first_snapshot]

    prev_date = None
    for date, mapping in dated_maps:
        if prev_date is not None and date <= prev_date:
            raise BuildError(
                f"snapshot collection dates must strictly increase ({prev_date} then {date})")
        for key, (eq, payload) in mapping.items():
            current = open_epochs.get(key)
            if current is None:
                # added (or first snapshot): valid from this file's date
                open_epochs[key] = [date, eq, payload, False, date]
            elif current[1] != eq:
                # changed: effective the day after the older file's date
                valid_from, _, old_payload, guessed, first_snap = current
                timelines.setdefault(key, []).append(
                    (valid_from, prev_date, old_payload, guessed, first_snap))
                open_epochs[key] = [prev_date + ONE_DAY, eq, payload, True, date]
            # unchanged: epoch simply continues
        if prev_date is not None:
            for key in list(open_epochs):
                if key not in mapping:
                    # removed: gone from the day after its last sighting
                    valid_from, _, payload, guessed, first_snap = open_epochs.pop(key)
                    timelines.setdefault(key, []).append(
                        (valid_from, prev_date, payload, guessed, first_snap))
        prev_date = date

    for key, (valid_from, _, payload, guessed, first_snap) in open_epochs.items():
        timelines.setdefault(key, []).append((valid_from, None, payload, guessed, first_snap))
    for epochs in timelines.values():
        epochs.sort(key=lambda e: e[0])
    return timelines


def _as_mapping(snapshot: As2OrgFileSnapshot) -> dict:
    """Collapse a snapshot's AS entries to one mapping per ASN.

    org_ids from all entries of the ASN are unioned (sorted); name, source and
    opaque_id come from the first entry in file order. Epoch equality is
    (as_name, source, org_ids); opaque_id rides along for display only.
    """
    per_asn: dict[int, dict] = {}
    for entry in snapshot.as_entries:
        slot = per_asn.get(entry.asn)
        if slot is None:
            per_asn[entry.asn] = {
                "as_name": entry.as_name, "source": entry.source,
                "opaque_id": entry.opaque_id, "org_ids": {entry.org_id},
            }
        else:
            slot["org_ids"].add(entry.org_id)
    mapping = {}
    for asn, slot in per_asn.items():
        org_ids = tuple(sorted(slot["org_ids"]))
        eq = (slot["as_name"], slot["source"], org_ids)
        payload = (slot["as_name"], slot["source"], org_ids, slot["opaque_id"])
        mapping[asn] = (eq, payload)
    return mapping


def _org_mapping(snapshot: As2OrgFileSnapshot) -> dict:
    mapping = {}
    for org_id, entry in snapshot.org_index().items():
        value = (entry.org_name, entry.country, entry.sources)
        mapping[org_id] = (value, value)
    return mapping


class AsOrgDirectory:
    """Built timelines, queryable by (ASN, date) and (org_id, date)."""

    def __init__(self, as_timelines: dict[int, list[AsOrgEpoch]],
                 org_timelines: dict[str, list[OrgEpoch]],
                 snapshot_dates: tuple[datetime.date, ...]):
        self.as_timelines = as_timelines
        self.org_timelines = org_timelines
        self.snapshot_dates = snapshot_dates
        self._as_froms = {asn: [e.valid_from for e in epochs]
                          for asn, epochs in as_timelines.items()}
        self._org_froms = {org: [e.valid_from for e in epochs]
                           for org, epochs in org_timelines.items()}

    @property
    def as_count(self) -> int:
        return len(self.as_timelines)

    @property
    def org_count(self) -> int:
        return len(self.org_timelines)

    def _covering(self, epochs, froms, date):
        idx = bisect_right(froms, date) - 1
        if idx < 0:
            return None
        epoch = epochs[idx]
        if epoch.valid_to is not None and date > epoch.valid_to:
            return None
        return epoch

    def as_epoch_at(self, asn: int, date: datetime.date) -> AsOrgEpoch | None:
        epochs = self.as_timelines.get(asn)
        if not epochs:
            return None
        return self._covering(epochs, self._as_froms[asn], date)

    def org_epoch_at(self, org_id: str, date: datetime.date) -> OrgEpoch | None:
        epochs = self.org_timelines.get(org_id)
        if not epochs:
            return None
        return self._covering(epochs, self._org_froms[org_id], date)

    def org_at(self, asn: int, date: datetime.date):
        """The AS epoch covering date plus each org_id resolved at that date,
        or None when no epoch covers it. Unresolvable org_ids map to None."""
        epoch = self.as_epoch_at(asn, date)
        if epoch is None:
            return None
        resolved = [(org_id, self.org_epoch_at(org_id, date)) for org_id in epoch.org_ids]
        return epoch, resolved


def build_timelines(snapshots: list[As2OrgFileSnapshot]) -> AsOrgDirectory:
    """Interpolate the ordered snapshot sequence into continuous timelines."""
    if not snapshots:
        raise BuildError("cannot build AS2ORG timelines from zero snapshots")
    dates = tuple(s.collection_date for s in snapshots)

    raw_as = _interpolate([(s.collection_date, _as_mapping(s)) for s in snapshots])
    as_timelines = {
        asn: [AsOrgEpoch(asn, vf, vt, payload[0], payload[1], payload[2], payload[3],
                         guessed, first_snap)
              for vf, vt, payload, guessed, first_snap in epochs]
        for asn, epochs in raw_as.items()
    }

    raw_org = _interpolate([(s.collection_date, _org_mapping(s)) for s in snapshots])
    org_timelines = {
        org_id: [OrgEpoch(org_id, vf, vt, value[0], value[1], value[2], guessed, first_snap)
                 for vf, vt, value, guessed, first_snap in epochs]
        for org_id, epochs in raw_org.items()
    }
    return AsOrgDirectory(as_timelines, org_timelines, dates)
