"""Shared test machinery: a brute-force linear-scan oracle and randomized
announcement worlds replayed through the real parse -> filter -> trie path.

The oracle never touches the trie: it reconstructs per-prefix epochs by
grouping each prefix's sighting days into maximal consecutive runs with a
constant (unioned) origin set, then answers lookups by scanning every
stored prefix that contains the address, longest first.
"""

from __future__ import annotations

import datetime
import ipaddress
import random

from histwhois.engine import FOUND, NOT_FOUND, LookupEngine
from histwhois.ingest import FilterPolicy, apply_filter, parse_pfx2as
from histwhois.timeline import AsOrgDirectory
from histwhois.trie import TemporalTrie

ONE_DAY = datetime.timedelta(days=1)

# every endpoint of every reserved range, plus their accepted neighbours
RESERVED_BOUNDARY_ASNS = [
    0, 23456, 64496, 64511, 64512, 65534, 65535, 65536, 65551, 65552,
    131071, 4200000000, 4294967294, 4294967295,
]
ACCEPTED_NEIGHBOUR_ASNS = [1, 23455, 23457, 64495, 131072, 4199999999]


class Oracle:
    """Reference lookups computed by linear scan over accepted lines."""

    def __init__(self, lines, newest_by_family):
        self.width = {4: 32, 6: 128}
        self.newest = newest_by_family
        sightings = {}
        for line in lines:
            key = (line.family, line.base, line.plen, line.prefix)
            per_day = sightings.setdefault(key, {})
            per_day[line.snapshot_date] = per_day.get(line.snapshot_date, set()) | set(line.origins)
        self.prefixes = []
        for (family, base, plen, prefix), per_day in sightings.items():
            epochs = []
            for day in sorted(per_day):
                origins = tuple(sorted(per_day[day]))
                if epochs and epochs[-1][1] == day - ONE_DAY and epochs[-1][2] == origins:
                    epochs[-1][1] = day
                else:
                    epochs.append([day, day, origins])
            newest = self.newest.get(family)
            final = [
                (first, None if newest is not None and last == newest else last, origins)
                for first, last, origins in epochs
            ]
            self.prefixes.append((family, base, plen, prefix, final))

    def lookup(self, family, addr, qdate):
        """(prefix, first, last, asns) of the longest covering match, or None."""
        width = self.width[family]
        best = None
        for fam, base, plen, prefix, epochs in self.prefixes:
            if fam != family:
                continue
            if plen and (addr >> (width - plen)) != (base >> (width - plen)):
                continue
            if best is not None and plen <= best[0]:
                continue
            for first, last, origins in epochs:
                if first <= qdate and (last is None or qdate <= last):
                    best = (plen, prefix, first, last, origins)
                    break
        return best[1:] if best else None


class World:
    def __init__(self, family, start_day, n_days, daily_texts):
        self.family = family
        self.start_day = start_day
        self.n_days = n_days
        self.days = [start_day + i * ONE_DAY for i in range(n_days)]
        self.daily_texts = daily_texts  # day -> raw pfx2as text

    @property
    def newest(self):
        return self.days[-1]


def _v4_prefix_pool(rng: random.Random, count: int):
    """Nested-ish prefixes: parents in 20.0.0.0/8 with children below them."""
    pool = []
    for _ in range(max(1, count // 3)):
        plen = rng.randint(8, 20)
        base = (20 << 24) | (rng.getrandbits(24) & ((1 << 24) - 1))
        base &= ~((1 << (32 - plen)) - 1) & 0xFFFFFFFF
        pool.append((base, plen))
        for _ in range(rng.randint(0, 3)):
            child_len = rng.randint(plen + 1, min(24, plen + 8)) if plen < 24 else 24
            child = base | (rng.getrandbits(32) & ((1 << (32 - plen)) - 1))
            child &= ~((1 << (32 - child_len)) - 1) & 0xFFFFFFFF
            pool.append((child, child_len))
    rng.shuffle(pool)
    seen = set()
    out = []
    for item in pool:
        if item not in seen:
            seen.add(item)
            out.append(item)
        if len(out) >= count:
            break
    return out


def _v6_prefix_pool(rng: random.Random, count: int):
    pool = []
    for _ in range(max(1, count // 2)):
        plen = rng.randint(18, 40)
        base = (0x2001 << 112) | (rng.getrandbits(64) << 48)
        base &= ~((1 << (128 - plen)) - 1) & ((1 << 128) - 1)
        pool.append((base, plen))
        child_len = min(48, plen + rng.randint(1, 8))
        child = base | (rng.getrandbits(128) & ((1 << (128 - plen)) - 1))
        child &= ~((1 << (128 - child_len)) - 1) & ((1 << 128) - 1)
        pool.append((child, child_len))
    seen = set()
    out = []
    for item in pool:
        if item not in seen:
            seen.add(item)
            out.append(item)
        if len(out) >= count:
            break
    return out


def _origin_set(rng: random.Random):
    kind = rng.random()
    asns = rng.sample([1000 + i for i in range(40)] + ACCEPTED_NEIGHBOUR_ASNS,
                      k=1 if kind < 0.7 else rng.randint(2, 4))
    if kind < 0.7:
        return str(asns[0])
    sep = "_" if kind < 0.9 else ","
    return sep.join(str(a) for a in asns)


def generate_world(seed: int, big: bool = False) -> World:
    """A randomized announcement schedule with MOAS, AS-set, gap, AS-change,
    same-day-duplicate and reject (reserved-ASN / out-of-bounds) lines."""
    rng = random.Random(seed)
    family = 6 if rng.random() < 0.2 else 4
    n_days = rng.randint(20, 100) if big else rng.randint(3, 14)
    n_prefixes = rng.randint(40, 140) if big else rng.randint(3, 22)
    start = datetime.date(2019, 1, 1) + datetime.timedelta(days=rng.randint(0, 1200))

    if family == 4:
        prefixes = _v4_prefix_pool(rng, n_prefixes)
    else:
        prefixes = _v6_prefix_pool(rng, n_prefixes)

    schedules = []
    for base, plen in prefixes:
        origin = _origin_set(rng)
        present_prob = rng.uniform(0.35, 0.95)
        change_prob = rng.uniform(0.0, 0.25)
        schedules.append((base, plen, origin, present_prob, change_prob))

    daily = {}
    for i in range(n_days):
        day = start + i * ONE_DAY
        lines = []
        for idx, (base, plen, origin, present_prob, change_prob) in enumerate(schedules):
            if rng.random() > present_prob:
                continue
            if rng.random() < change_prob:
                origin = _origin_set(rng)
                schedules[idx] = (base, plen, origin, present_prob, change_prob)
            addr = _addr_text(family, base)
            lines.append(f"{addr}\t{plen}\t{origin}")
            if rng.random() < 0.08:
                # same-day duplicate with a different set: union semantics
                lines.append(f"{addr}\t{plen}\t{_origin_set(rng)}")
        # noise that the filter must drop
        if rng.random() < 0.5:
            asn = rng.choice(RESERVED_BOUNDARY_ASNS)
            lines.append(f"{_addr_text(family, prefixes[0][0])}\t{prefixes[0][1]}\t{asn}")
        if rng.random() < 0.3 and family == 4:
            lines.append(f"20.9.9.128\t25\t1000")   # too specific
            lines.append(f"32.0.0.0\t7\t1001")      # too broad
        rng.shuffle(lines)
        daily[day] = "\n".join(lines) + "\n" if lines else ""
    return World(family, start, n_days, daily)


def _addr_text(family, value):
    return str(ipaddress.IPv4Address(value) if family == 4 else ipaddress.IPv6Address(value))


def replay_world(world: World, policy: FilterPolicy | None = None):
    """Full-path build: parse text -> filter -> replay; returns (engine, oracle)."""
    policy = policy or FilterPolicy()
    trie = TemporalTrie(world.family)
    other = TemporalTrie(6 if world.family == 4 else 4)
    accepted = []
    for day in world.days:
        parsed = parse_pfx2as(world.daily_texts[day].encode(), day)
        for line in parsed.lines:
            if apply_filter(line, policy) is None:
                accepted.append(line)
                trie.insert_day(line)
    trie.finalize(world.newest)
    other.finalize(None)
    directory = AsOrgDirectory({}, {}, ())
    if world.family == 4:
        engine = LookupEngine(trie, other, directory)
    else:
        engine = LookupEngine(other, trie, directory)
    oracle = Oracle(accepted, {world.family: world.newest})
    return engine, oracle, accepted


def query_points(world: World, accepted, rng: random.Random, max_days=10):
    """Addresses and dates worth probing: prefix edges, insiders, outsiders,
    in-range days plus out-of-range days on both sides."""
    width = 32 if world.family == 4 else 128
    addrs = set()
    for line in accepted[:400]:
        host_span = width - line.plen
        addrs.add(line.base)
        addrs.add(line.base | ((1 << host_span) - 1))
        addrs.add(line.base | (rng.getrandbits(host_span) if host_span else 0))
    for _ in range(4):
        if world.family == 4:
            addrs.add((20 << 24) | rng.getrandbits(24))
            addrs.add(rng.getrandbits(32))
        else:
            addrs.add((0x2001 << 112) | rng.getrandbits(112))
    days = list(world.days)
    if len(days) > max_days:
        days = rng.sample(days, max_days)
    days += [world.start_day - ONE_DAY, world.newest + ONE_DAY,
             world.newest + 400 * ONE_DAY]
    return sorted(addrs), days


def assert_world_matches(world: World, engine: LookupEngine, oracle: Oracle,
                         accepted, rng: random.Random, max_days=10) -> int:
    """Every sampled (address, date) must agree between engine and oracle."""
    checked = 0
    addrs, days = query_points(world, accepted, rng, max_days)
    for addr in addrs:
        text = _addr_text(world.family, addr)
        for day in days:
            got = engine.lookup(text, day)
            want = oracle.lookup(world.family, addr, day)
            if want is None:
                assert got.status == NOT_FOUND, (text, day, got)
            else:
                assert got.status == FOUND, (text, day, want)
                assert (got.prefix, got.data_first, got.data_last, got.asns) == want, \
                    (text, day, got, want)
            checked += 1
    return checked
