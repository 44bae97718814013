"""Random-walk corpus maintained incrementally across snapshots.

Each node owns ``r`` walks of up to ``l`` steps. When a snapshot changes the
graph, only walks that visit an affected node are repaired: the prefix up to
the first affected node is kept and the rest is re-simulated on the new graph.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .stream import SnapshotDelta, TemporalGraph


def walk_rng(seed: int, walk_id: int, stage: int) -> np.random.Generator:
    """Independent stream for one walk simulation.

    ``stage`` is 0 for initial simulation and ``t + 1`` for a repair at
    snapshot ``t``, so results do not depend on scheduling order.
    """
    return np.random.default_rng([seed, walk_id, stage])


def simulate(graph: TemporalGraph, start: int, steps: int, rng: np.random.Generator) -> list[int]:
    walk = [start]
    if steps <= 0:
        return walk
    cur = start
    for u in rng.random(steps).tolist():
        nb = graph.neighbors(cur)
        if not nb:
            break
        cur = nb[int(u * len(nb))]
        walk.append(cur)
    return walk


def first_positions(walk: Iterable[int]) -> dict[int, int]:
    firsts: dict[int, int] = {}
    for i, v in enumerate(walk):
        firsts.setdefault(v, i)
    return firsts


@dataclass
class RepairReport:
    walks_updated: int = 0
    positions_preserved: int = 0
    walks_created: int = 0
    walk_ids: list[int] = field(default_factory=list)


class WalkCorpus:
    def __init__(self, r: int, l: int, seed: int = 0):
        if r < 1 or l < 1:
            raise ValueError("walks per node and walk length must both be >= 1")
        self.r = r
        self.l = l
        self.seed = seed
        self.walks: list[tuple[int, ...]] = []
        self.origins: dict[int, list[int]] = {}
        self.index: dict[int, dict[int, int]] = {}

    def __len__(self) -> int:
        return len(self.walks)

    def _index_add(self, wid: int, walk: tuple[int, ...]) -> None:
        for v, pos in first_positions(walk).items():
            self.index.setdefault(v, {})[wid] = pos

    def _index_remove(self, wid: int, walk: tuple[int, ...]) -> None:
        for v in set(walk):
            entries = self.index[v]
            del entries[wid]
            if not entries:
                del self.index[v]

    def _add_node_walks(self, graph: TemporalGraph, v: int, stage: int) -> list[int]:
        ids = []
        for _ in range(self.r):
            wid = len(self.walks)
            walk = tuple(simulate(graph, v, self.l, walk_rng(self.seed, wid, stage)))
            self.walks.append(walk)
            self._index_add(wid, walk)
            ids.append(wid)
        self.origins[v] = ids
        return ids

    def affected_walks(self, affected: Iterable[int]) -> dict[int, int]:
        """Walk id -> earliest position at which any affected node occurs."""
        hits: dict[int, int] = {}
        for v in affected:
            for wid, pos in self.index.get(v, {}).items():
                prev = hits.get(wid)
                if prev is None or pos < prev:
                    hits[wid] = pos
        return hits

    def repair_walks(self, graph: TemporalGraph, delta: SnapshotDelta, t: int,
                     threads: int = 1) -> RepairReport:
        """Re-simulate suffixes of walks touched by ``delta``; ``graph`` must already reflect it."""
        report = RepairReport()
        hits = sorted(self.affected_walks(delta.affected).items())
        stage = t + 1

        def work(chunk):
            out = []
            for wid, p in chunk:
                old = self.walks[wid]
                tail = simulate(graph, old[p], self.l - p, walk_rng(self.seed, wid, stage))
                out.append((wid, p, old[:p] + tuple(tail)))
            return out

        if threads > 1 and len(hits) > 1:
            blk = -(-len(hits) // threads)
            chunks = [hits[i:i + blk] for i in range(0, len(hits), blk)]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = [r for part in pool.map(work, chunks) for r in part]
        else:
            results = work(hits)

        for wid, p, walk in results:
            self._index_remove(wid, self.walks[wid])
            self.walks[wid] = walk
            self._index_add(wid, walk)
            report.walks_updated += 1
            report.positions_preserved += p + 1
            report.walk_ids.append(wid)

        for v in sorted(v for v in graph.nodes if v not in self.origins):
            ids = self._add_node_walks(graph, v, stage)
            report.walks_created += len(ids)
            report.walk_ids.extend(ids)
        return report

    def rebuild_index(self) -> dict[int, dict[int, int]]:
        index: dict[int, dict[int, int]] = {}
        for wid, walk in enumerate(self.walks):
            for v, pos in first_positions(walk).items():
                index.setdefault(v, {})[wid] = pos
        return index

    def validity_violations(self, graph: TemporalGraph) -> int:
        bad = 0
        for walk in self.walks:
            for a, b in zip(walk, walk[1:]):
                if not graph.has_edge(a, b):
                    bad += 1
        return bad

    def node_frequencies(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for walk in self.walks:
            for v in walk:
                counts[v] = counts.get(v, 0) + 1
        return counts

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for walk in self.walks:
                fh.write(" ".join(map(str, walk)) + "\n")


def init_corpus(graph: TemporalGraph, r: int = 10, l: int = 20, seed: int = 0) -> WalkCorpus:
    corpus = WalkCorpus(r, l, seed)
    for v in sorted(graph.nodes):
        corpus._add_node_walks(graph, v, stage=0)
    return corpus
