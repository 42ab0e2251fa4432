"""The core index: one path-compressed binary trie per address family whose
records hold date-ranged attribution epochs, built by replaying daily
aggregates in date order and sealed before serving.
"""

from __future__ import annotations

import datetime
from bisect import bisect_right

from .dates import ONE_DAY
from .errors import BuildError
from .ingest import Pfx2AsLine, AS_SET, MOAS, SINGLE, canonical_prefix


class AttributionEpoch:
    """A run of days during which a prefix kept a constant origin AS set.
    last_seen None means the prefix was still visible in the newest snapshot."""

    __slots__ = ("first_seen", "last_seen", "origins", "origin_kind")

    def __init__(self, first_seen: datetime.date, last_seen: datetime.date | None,
                 origins: tuple[int, ...], origin_kind: str):
        self.first_seen = first_seen
        self.last_seen = last_seen
        self.origins = origins
        self.origin_kind = origin_kind

    def covers(self, day: datetime.date) -> bool:
        return self.first_seen <= day and (self.last_seen is None or day <= self.last_seen)

    def __repr__(self):
        return f"AttributionEpoch({self.first_seen}, {self.last_seen}, {self.origins}, {self.origin_kind})"

    def __eq__(self, other):
        return (isinstance(other, AttributionEpoch)
                and self.first_seen == other.first_seen
                and self.last_seen == other.last_seen
                and self.origins == other.origins
                and self.origin_kind == other.origin_kind)


class PrefixRecord:
    __slots__ = ("prefix", "base", "plen", "family", "epochs", "reserved_label")

    def __init__(self, prefix: str, base: int, plen: int, family: int,
                 epochs: list[AttributionEpoch] | None = None,
                 reserved_label: str | None = None):
        self.prefix = prefix
        self.base = base
        self.plen = plen
        self.family = family
        self.epochs = epochs if epochs is not None else []
        self.reserved_label = reserved_label

    def epoch_at(self, day: datetime.date) -> AttributionEpoch | None:
        epochs = self.epochs
        if not epochs:
            return None
        idx = bisect_right(epochs, day, key=lambda e: e.first_seen) - 1
        if idx < 0:
            return None
        epoch = epochs[idx]
        return epoch if epoch.covers(day) else None


class _Node:
    __slots__ = ("key", "plen", "zero", "one", "record")

    def __init__(self, key: int, plen: int, record: PrefixRecord | None = None):
        self.key = key          # top plen bits of the prefix, right-aligned
        self.plen = plen
        self.zero = None
        self.one = None
        self.record = record


def _merge_kind(a_kind: str, b_kind: str, origins: tuple[int, ...]) -> str:
    if AS_SET in (a_kind, b_kind):
        return AS_SET
    return SINGLE if len(origins) == 1 else MOAS


class TemporalTrie:
    """Binary prefix trie with path compression for one address family.

    Build phase is single-writer and strictly date-ordered; finalize() seals
    the structure, after which it is immutable and safe for concurrent reads.
    """

    def __init__(self, family: int):
        if family not in (4, 6):
            raise ValueError("family must be 4 or 6")
        self.family = family
        self.width = 32 if family == 4 else 128
        self._root: _Node | None = None
        self._records = 0
        self._nodes = 0
        self.sealed = False
        self.last_replayed: datetime.date | None = None
        self.newest_date: datetime.date | None = None

    # -- structure ---------------------------------------------------------

    @property
    def record_count(self) -> int:
        return self._records

    @property
    def node_count(self) -> int:
        return self._nodes

    def _find_or_insert(self, key: int, plen: int) -> _Node:
        """Return the node for (key, plen), creating path nodes as needed."""
        if self._root is None:
            self._root = _Node(key, plen)
            self._nodes += 1
            return self._root

        parent: _Node | None = None
        parent_bit = 0
        node = self._root
        while True:
            m = min(node.plen, plen)
            node_top = node.key >> (node.plen - m) if m else 0
            key_top = key >> (plen - m) if m else 0
            if node_top == key_top:
                if node.plen == plen:
                    return node
                if node.plen < plen:
                    bit = (key >> (plen - node.plen - 1)) & 1
                    child = node.one if bit else node.zero
                    if child is None:
                        new = _Node(key, plen)
                        self._nodes += 1
                        if bit:
                            node.one = new
                        else:
                            node.zero = new
                        return new
                    parent, parent_bit, node = node, bit, child
                    continue
                # new key is an ancestor of this node: splice above it
                new = _Node(key, plen)
                self._nodes += 1
                down_bit = (node.key >> (node.plen - plen - 1)) & 1
                if down_bit:
                    new.one = node
                else:
                    new.zero = node
                self._replace_child(parent, parent_bit, new)
                return new
            # keys diverge inside the first m bits: branch at the fork
            diff = node_top ^ key_top
            fork_len = m - diff.bit_length()
            branch = _Node(key >> (plen - fork_len) if fork_len else 0, fork_len)
            leaf = _Node(key, plen)
            self._nodes += 2
            node_bit = (node.key >> (node.plen - fork_len - 1)) & 1
            if node_bit:
                branch.one, branch.zero = node, leaf
            else:
                branch.zero, branch.one = node, leaf
            self._replace_child(parent, parent_bit, branch)
            return leaf

    def _replace_child(self, parent: _Node | None, bit: int, new: _Node) -> None:
        if parent is None:
            self._root = new
        elif bit:
            parent.one = new
        else:
            parent.zero = new

    def _get_record(self, key: int, plen: int, prefix: str) -> PrefixRecord:
        node = self._find_or_insert(key, plen)
        if node.record is None:
            width_base = key << (self.width - plen) if plen else 0
            node.record = PrefixRecord(prefix, width_base, plen, self.family)
            self._records += 1
        return node.record

    def match_stack(self, base: int, plen: int) -> list[PrefixRecord]:
        """Records whose prefixes contain (base, plen), least specific first."""
        stack: list[PrefixRecord] = []
        node = self._root
        while node is not None:
            if node.plen > plen:
                break
            if node.plen and (base >> (self.width - node.plen)) != node.key:
                break
            if node.record is not None:
                stack.append(node.record)
            if node.plen == plen:
                break
            bit = (base >> (self.width - node.plen - 1)) & 1
            node = node.one if bit else node.zero
        return stack

    def exact_record(self, base: int, plen: int) -> PrefixRecord | None:
        stack = self.match_stack(base, plen)
        if stack and stack[-1].plen == plen:
            return stack[-1]
        return None

    def iter_records(self):
        """All records in (base, plen) order, for serialization and scans."""
        out: list[PrefixRecord] = []
        todo = [self._root] if self._root is not None else []
        while todo:
            node = todo.pop()
            if node.record is not None:
                out.append(node.record)
            if node.zero is not None:
                todo.append(node.zero)
            if node.one is not None:
                todo.append(node.one)
        out.sort(key=lambda r: (r.base, r.plen))
        return out

    # -- build -------------------------------------------------------------

    def _check_mutable(self) -> None:
        if self.sealed:
            raise BuildError("trie is sealed; builds are build-then-seal")

    def insert_day(self, line: Pfx2AsLine) -> None:
        """Replay one accepted line. Lines must arrive in snapshot-date order."""
        self._check_mutable()
        day = line.snapshot_date
        if self.last_replayed is not None and day < self.last_replayed:
            raise BuildError(
                f"out-of-order replay: {day} after {self.last_replayed}")
        self.last_replayed = day

        key = line.base >> (self.width - line.plen) if line.plen else 0
        record = self._get_record(key, line.plen, line.prefix)
        if record.reserved_label is not None:
            # announced data overrides a static seed
            record.reserved_label = None

        epochs = record.epochs
        if not epochs:
            epochs.append(AttributionEpoch(day, day, line.origins, line.origin_kind))
            return
        current = epochs[-1]
        if current.last_seen == day:
            # same-day duplicate: the day's effective origin set is the union
            if set(line.origins) <= set(current.origins):
                return
            union = tuple(sorted(set(current.origins) | set(line.origins)))
            kind = _merge_kind(current.origin_kind, line.origin_kind, union)
            if current.first_seen == day:
                previous = epochs[-2] if len(epochs) > 1 else None
                if (previous is not None and previous.last_seen == day - ONE_DAY
                        and previous.origins == union):
                    # the union restored yesterday's set: rejoin that run
                    epochs.pop()
                    previous.last_seen = day
                else:
                    current.origins = union
                    current.origin_kind = kind
            else:
                current.last_seen = day - ONE_DAY
                epochs.append(AttributionEpoch(day, day, union, kind))
        elif line.origins == current.origins and current.last_seen == day - ONE_DAY:
            # no gap, same origins: extend
            current.last_seen = day
        else:
            # gap, or origin set changed: new date range starts today;
            # the old epoch keeps its recorded last_seen
            epochs.append(AttributionEpoch(day, day, line.origins, line.origin_kind))

    def seed_reserved(self, registry) -> None:
        """Statically add special-use prefixes (skipping any with real epochs)."""
        self._check_mutable()
        for prefix_text, label in registry:
            base_text, _, len_text = prefix_text.partition("/")
            plen = int(len_text)
            prefix, base, family = canonical_prefix(base_text, plen)
            if family != self.family:
                continue
            key = base >> (self.width - plen) if plen else 0
            record = self._get_record(key, plen, prefix)
            if not record.epochs and record.reserved_label is None:
                record.reserved_label = label

    def finalize(self, newest_snapshot_date: datetime.date | None) -> None:
        """Open-end every epoch still visible in the newest snapshot and seal."""
        self._check_mutable()
        if newest_snapshot_date is None and self._records:
            has_epochs = any(r.epochs for r in self.iter_records())
            if has_epochs:
                raise BuildError("finalize requires the newest snapshot date")
        if newest_snapshot_date is not None:
            for record in self.iter_records():
                if record.epochs:
                    last = record.epochs[-1]
                    if last.last_seen == newest_snapshot_date:
                        last.last_seen = None
        self.newest_date = newest_snapshot_date
        self.sealed = True

    # -- snapshot load path --------------------------------------------------

    def insert_record(self, prefix: str, base: int, plen: int,
                      epochs: list[AttributionEpoch],
                      reserved_label: str | None = None) -> None:
        """Install a fully-formed record (used when loading a snapshot)."""
        self._check_mutable()
        key = base >> (self.width - plen) if plen else 0
        record = self._get_record(key, plen, prefix)
        record.epochs = epochs
        record.reserved_label = reserved_label
