"""Disagreement evaluation between the historic index and a current
attribution table, per /24 (IPv4) and /48 (IPv6) unit and per period.

The historic side of a (unit, period) pair is the joined state sampled on
the 1st, 14th and 28th of the period; the reference side comes from a flat
delimited file (unit, AS list). Only an exact AS-set match counts as
agreement; a subset is a disagreement. Units missing on either side are
uncomparable and sit outside the percentage denominator.
"""

from __future__ import annotations

import datetime
import ipaddress
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .engine import FOUND, LookupEngine
from .errors import QueryError
from .ingest import canonical_prefix

log = logging.getLogger(__name__)

V4_UNIT_LEN = 24
V6_UNIT_LEN = 48
SAMPLE_DAYS = (1, 14, 28)
MAX_UNIT_PROBES = 256


def normalize_unit(text: str) -> tuple[int, int, int, str]:
    """Map an address or prefix onto its comparison unit (/24 or /48)."""
    text = text.strip()
    try:
        if "/" in text:
            base_text, _, len_text = text.partition("/")
            plen = int(len_text)
            _, base, family = canonical_prefix(base_text, plen)
        else:
            addr = ipaddress.ip_address(text)
            family = 4 if addr.version == 4 else 6
            base = int(addr)
            plen = 32 if family == 4 else 128
    except ValueError as exc:
        raise QueryError(f"bad unit {text!r}: {exc}") from exc
    unit_len = V4_UNIT_LEN if family == 4 else V6_UNIT_LEN
    if plen > unit_len:
        plen = unit_len
    prefix, base, family = canonical_prefix(_addr_text(family, base), plen)
    return family, base, plen, prefix


def _addr_text(family: int, value: int) -> str:
    return str(ipaddress.IPv4Address(value) if family == 4 else ipaddress.IPv6Address(value))


def load_reference(path: Path | str) -> dict[str, tuple[int, ...]]:
    """Flat delimited reference table: `<unit> <as,list>` or `<unit>|<as list>`.

    Units are normalized; AS lists may be separated by commas, underscores,
    or spaces after the first column.
    """
    table: dict[str, tuple[int, ...]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "|" in line:
                unit_text, _, asn_text = line.partition("|")
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    log.warning("reference line %d has no AS list: %r", lineno, line)
                    continue
                unit_text, asn_text = parts
            try:
                _, _, _, unit = normalize_unit(unit_text)
                asns = tuple(sorted({
                    int(tok) for tok in asn_text.replace(",", " ").replace("_", " ").split()
                }))
            except (ValueError, QueryError) as exc:
                log.warning("skipping reference line %d: %s", lineno, exc)
                continue
            if not asns:
                log.warning("reference line %d has an empty AS list", lineno)
                continue
            table[unit] = asns
    return table


def parse_period(text: str) -> tuple[int, int]:
    text = text.strip()
    if len(text) != 6 or not text.isdigit():
        raise QueryError(f"bad period (want YYYYMM): {text!r}")
    year, month = int(text[:4]), int(text[4:6])
    if not 1 <= month <= 12:
        raise QueryError(f"bad period month: {text!r}")
    return year, month


def period_sample_dates(period: str, days=SAMPLE_DAYS) -> tuple[datetime.date, ...]:
    year, month = parse_period(period)
    return tuple(datetime.date(year, month, day) for day in days)


def historic_unit_asns(engine: LookupEngine, unit_prefix: str,
                       dates) -> tuple[int, ...]:
    """Joined AS set of a unit across sample dates, with finer probes when a
    matched prefix is more specific than the unit (non-default policies)."""
    family, base, plen, _ = normalize_unit(unit_prefix)
    width = 32 if family == 4 else 128
    asns: set[int] = set()
    joined = engine.lookup_joined(unit_prefix, dates)
    asns.update(joined.asns)
    for day in joined.found_dates:
        result = joined.per_date[day]
        matched_len = int(result.prefix.rpartition("/")[2])
        if matched_len <= plen:
            continue
        step = 1 << (width - matched_len)
        count = 1 << (matched_len - plen)
        for i in range(1, min(count, MAX_UNIT_PROBES)):
            sub = engine.lookup(_addr_text(family, base + i * step), day)
            if sub.status == FOUND:
                asns.update(sub.asns)
    return tuple(sorted(asns))


@dataclass
class PeriodStats:
    period: str
    compared: int = 0
    disagree: int = 0
    uncomparable: int = 0
    histogram: dict[tuple[tuple[int, ...], tuple[int, ...]], int] = field(default_factory=dict)

    @property
    def percent(self) -> float:
        return 100.0 * self.disagree / self.compared if self.compared else 0.0


@dataclass
class DisagreementReport:
    periods: list[PeriodStats]

    def to_doc(self) -> dict:
        return {
            "periods": [
                {
                    "period": p.period,
                    "compared": p.compared,
                    "disagree": p.disagree,
                    "uncomparable": p.uncomparable,
                    "percent": round(p.percent, 4),
                    "histogram": [
                        {"reference": list(ref), "historic": list(hist), "count": count}
                        for (ref, hist), count in sorted(p.histogram.items())
                    ],
                }
                for p in self.periods
            ]
        }

    def as_text(self) -> str:
        lines = ["period\tcompared\tdisagree\tuncomparable\tpercent"]
        for p in self.periods:
            lines.append(f"{p.period}\t{p.compared}\t{p.disagree}\t{p.uncomparable}"
                         f"\t{p.percent:.2f}")
        lines.append("")
        lines.append("period\treference_asns\thistoric_asns\tcount")
        for p in self.periods:
            for (ref, hist), count in sorted(p.histogram.items()):
                ref_text = ",".join(str(a) for a in ref) or "-"
                hist_text = ",".join(str(a) for a in hist) or "-"
                lines.append(f"{p.period}\t{ref_text}\t{hist_text}\t{count}")
        return "\n".join(lines) + "\n"


def evaluate_disagreement(engine: LookupEngine,
                          reference: dict[str, tuple[int, ...]],
                          queries: list[tuple[str, str]],
                          sample_days=SAMPLE_DAYS) -> DisagreementReport:
    """Compare historic vs reference AS sets for (unit, period) pairs."""
    stats: dict[str, PeriodStats] = {}
    for unit_text, period in queries:
        _, _, _, unit = normalize_unit(unit_text)
        slot = stats.setdefault(period, PeriodStats(period))
        ref_asns = reference.get(unit)
        dates = period_sample_dates(period, sample_days)
        hist_asns = historic_unit_asns(engine, unit, dates)
        if ref_asns is None or not hist_asns:
            slot.uncomparable += 1
            continue
        slot.compared += 1
        if hist_asns != ref_asns:
            slot.disagree += 1
            key = (ref_asns, hist_asns)
            slot.histogram[key] = slot.histogram.get(key, 0) + 1
    return DisagreementReport([stats[p] for p in sorted(stats)])


def write_reports(report: DisagreementReport, out_base: Path | str) -> tuple[Path, Path]:
    """Write the delimited and the machine-readable report files."""
    base = Path(out_base)
    tsv_path = base.with_suffix(".tsv")
    json_path = base.with_suffix(".json")
    tsv_path.parent.mkdir(parents=True, exist_ok=True)
    tsv_path.write_text(report.as_text(), encoding="utf-8")
    json_path.write_text(json.dumps(report.to_doc(), indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    return tsv_path, json_path
