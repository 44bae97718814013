"""Temporal edge streams: parsing, snapshot binning and the evolving graph."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO


class EdgeFormatError(ValueError):
    pass


class SequencingError(RuntimeError):
    pass


class EventKind(enum.Enum):
    INSERT = "insert"
    DELETE = "delete"


@dataclass(frozen=True, order=True)
class EdgeEvent:
    time: int
    src: int
    dst: int
    kind: EventKind = field(default=EventKind.INSERT, compare=False)


@dataclass
class ParseStats:
    lines: int = 0
    events: int = 0
    self_loops: int = 0
    malformed: int = 0
    first_bad_line: int | None = None


def _normalize(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _parse_time(tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        val = float(tok)
        if not math.isfinite(val) or val != int(val):
            raise
        return int(val)


def parse_edge_stream(source: str | Path | TextIO | Iterable[str], max_malformed: int = 100,
                      stats: ParseStats | None = None) -> Iterator[EdgeEvent]:
    """Lazily yield edge events from a whitespace-separated temporal edge list.

    Accepted line layouts are ``src dst time`` and ``src dst weight time``;
    the layout is fixed by the first data line and the weight is ignored.
    A ``-`` prefix on the source id marks a deletion. Lines starting with
    ``#`` or ``%`` are comments. Self-loops are dropped and counted in
    ``stats``. More than ``max_malformed`` bad lines raises
    :class:`EdgeFormatError`.
    """
    if stats is None:
        stats = ParseStats()
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from parse_edge_stream(fh, max_malformed, stats)
        return

    width = None
    for lineno, raw in enumerate(source, start=1):
        stats.lines += 1
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        parts = line.split()
        if width is None and len(parts) in (3, 4):
            width = len(parts)
        try:
            if len(parts) != width:
                raise ValueError("field count")
            kind = EventKind.INSERT
            s = parts[0]
            if s.startswith("-"):
                kind = EventKind.DELETE
                s = s[1:]
            src, dst = int(s), int(parts[1])
            t = _parse_time(parts[-1])
            if src < 0 or dst < 0 or t < 0:
                raise ValueError("negative field")
        except ValueError:
            stats.malformed += 1
            if stats.first_bad_line is None:
                stats.first_bad_line = lineno
            if stats.malformed > max_malformed:
                raise EdgeFormatError(
                    f"too many malformed lines ({stats.malformed}); first bad line {stats.first_bad_line}"
                ) from None
            continue
        if src == dst:
            stats.self_loops += 1
            continue
        a, b = _normalize(src, dst)
        stats.events += 1
        yield EdgeEvent(t, a, b, kind)


@dataclass(frozen=True)
class FixedCount:
    """Split [t_min, t_max] into ``count`` equal-width bins; the last is right-closed."""

    count: int


@dataclass(frozen=True)
class FixedWindow:
    """Bin index is ``(time - t_min) // width``."""

    width: int


@dataclass
class Snapshot:
    index: int
    events: list[EdgeEvent]


def bin_into_snapshots(events: Iterable[EdgeEvent], policy: FixedCount | FixedWindow) -> list[Snapshot]:
    if isinstance(policy, FixedCount):
        if policy.count < 1:
            raise ValueError("snapshot count must be >= 1")
    elif isinstance(policy, FixedWindow):
        if policy.width < 1:
            raise ValueError("window width must be >= 1")
    else:
        raise TypeError(f"unknown binning policy {policy!r}")

    evs = list(events)
    if not evs:
        return []
    if any(evs[i].time > evs[i + 1].time for i in range(len(evs) - 1)):
        evs.sort(key=lambda e: e.time)
    t_min, t_max = evs[0].time, evs[-1].time
    span = t_max - t_min

    if isinstance(policy, FixedCount):
        n_bins = policy.count

        def bin_of(t: int) -> int:
            if span == 0:
                return 0
            return min((t - t_min) * n_bins // span, n_bins - 1)
    else:
        n_bins = span // policy.width + 1

        def bin_of(t: int) -> int:
            return (t - t_min) // policy.width

    snaps = [Snapshot(i, []) for i in range(n_bins)]
    for e in evs:
        snaps[bin_of(e.time)].events.append(e)
    return snaps


@dataclass
class SnapshotDelta:
    added: list[tuple[int, int]]
    removed: list[tuple[int, int]]
    affected: set[int]
    new_nodes: set[int] = field(default_factory=set)

    def is_empty(self) -> bool:
        return not self.added and not self.removed


class TemporalGraph:
    """Undirected active edge set that evolves snapshot by snapshot.

    Nodes stay in ``nodes`` once seen, even if all their edges are removed.
    """

    def __init__(self) -> None:
        self.adj: dict[int, set[int]] = {}
        self.m = 0
        self.last_touched: dict[int, int] = {}
        self.next_index = 0
        self._nbr_cache: dict[int, tuple[int, ...]] = {}

    @property
    def nodes(self):
        return self.adj.keys()

    @property
    def n(self) -> int:
        return len(self.adj)

    def add_node(self, v: int) -> bool:
        if v in self.adj:
            return False
        self.adj[v] = set()
        return True

    def has_edge(self, a: int, b: int) -> bool:
        nb = self.adj.get(a)
        return nb is not None and b in nb

    def neighbors(self, v: int) -> tuple[int, ...]:
        """Sorted neighbors of ``v`` (cached until the next mutation of ``v``)."""
        cached = self._nbr_cache.get(v)
        if cached is None:
            cached = tuple(sorted(self.adj.get(v, ())))
            self._nbr_cache[v] = cached
        return cached

    def degree(self, v: int) -> int:
        return len(self.adj.get(v, ()))

    def _insert(self, a: int, b: int) -> bool:
        self.add_node(a)
        self.add_node(b)
        if b in self.adj[a]:
            return False
        self.adj[a].add(b)
        self.adj[b].add(a)
        self.m += 1
        self._nbr_cache.pop(a, None)
        self._nbr_cache.pop(b, None)
        return True

    def _delete(self, a: int, b: int) -> bool:
        if not self.has_edge(a, b):
            return False
        self.adj[a].discard(b)
        self.adj[b].discard(a)
        self.m -= 1
        self._nbr_cache.pop(a, None)
        self._nbr_cache.pop(b, None)
        return True

    def edges(self) -> Iterator[tuple[int, int]]:
        for a, nb in self.adj.items():
            for b in nb:
                if a < b:
                    yield (a, b)

    def apply_snapshot(self, snap: Snapshot) -> SnapshotDelta:
        """Apply all events of ``snap`` and return the net change."""
        if snap.index != self.next_index:
            raise SequencingError(f"expected snapshot {self.next_index}, got {snap.index}")
        before: dict[tuple[int, int], bool] = {}
        new_nodes: set[int] = set()
        for e in snap.events:
            a, b = _normalize(e.src, e.dst)
            key = (a, b)
            if key not in before:
                before[key] = self.has_edge(a, b)
            if e.kind is EventKind.INSERT:
                new_nodes.update(v for v in key if v not in self.adj)
                self._insert(a, b)
            else:
                self._delete(a, b)
        added, removed = [], []
        for key, was in before.items():
            now = self.has_edge(*key)
            if now and not was:
                added.append(key)
            elif was and not now:
                removed.append(key)
        affected = {v for e in added for v in e} | {v for e in removed for v in e}
        for v in affected:
            self.last_touched[v] = snap.index
        self.next_index += 1
        return SnapshotDelta(added, removed, affected, new_nodes)

    def copy(self) -> "TemporalGraph":
        g = TemporalGraph()
        g.adj = {v: set(nb) for v, nb in self.adj.items()}
        g.m = self.m
        g.last_touched = dict(self.last_touched)
        g.next_index = self.next_index
        return g

    def adjacency_snapshot(self) -> dict[int, frozenset[int]]:
        return {v: frozenset(nb) for v, nb in self.adj.items()}
