"""R-tree over 1-D node keys that tracks which leaves a snapshot touches.

Nodes carry no coordinates, so the key is the node id and every MBR is an
integer interval. Linked nodes are grouped by inserting them in
connected-component (BFS) order at build time. Updates only recompute the
leaves hosting affected nodes and the MBRs on their paths to the root.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .stream import SnapshotDelta, TemporalGraph


@dataclass(frozen=True)
class Mbr:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, other: "Mbr") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def union(self, other: "Mbr") -> "Mbr":
        return Mbr(min(self.lo, other.lo), max(self.hi, other.hi))

    def enlargement(self, key: int) -> int:
        return max(self.hi, key) - min(self.lo, key) - (self.hi - self.lo)

    @property
    def length(self) -> int:
        return self.hi - self.lo


class _TreeNode:
    __slots__ = ("id", "leaf", "entries", "mbr", "parent")

    def __init__(self, node_id: int, leaf: bool, entries=None, parent=None):
        self.id = node_id
        self.leaf = leaf
        self.entries: list = entries if entries is not None else []
        self.mbr: Mbr | None = None
        self.parent: _TreeNode | None = parent

    def recompute(self) -> None:
        if self.leaf:
            self.mbr = Mbr(min(self.entries), max(self.entries))
        else:
            lo = min(c.mbr.lo for c in self.entries)
            hi = max(c.mbr.hi for c in self.entries)
            self.mbr = Mbr(lo, hi)


@dataclass
class DirtyReport:
    touched_leaves: int
    total_leaves: int
    affected_nodes: int
    inserted_nodes: int = 0
    split_leaves: int = 0


class NodeNotIndexed(KeyError):
    pass


class RTree:
    def __init__(self, capacity: int = 64, fanout: int = 16):
        if capacity < 2 or fanout < 2:
            raise ValueError("capacity and fanout must both be >= 2")
        self.capacity = capacity
        self.fanout = fanout
        self._ids = itertools.count()
        self.root = _TreeNode(next(self._ids), leaf=True)
        self.locator: dict[int, _TreeNode] = {}
        self.dirty: set[int] = set()
        self._new_leaves: set[int] = set()

    # -- queries -------------------------------------------------------
    def locate(self, node: int) -> _TreeNode:
        try:
            return self.locator[node]
        except KeyError:
            raise NodeNotIndexed(f"node {node} is not indexed") from None

    def __contains__(self, node: int) -> bool:
        return node in self.locator

    def __len__(self) -> int:
        return len(self.locator)

    def leaves(self) -> list[_TreeNode]:
        out, stack = [], [self.root]
        while stack:
            nd = stack.pop()
            if nd.leaf:
                out.append(nd)
            else:
                stack.extend(reversed(nd.entries))
        return out

    def height(self) -> int:
        h, nd = 1, self.root
        while not nd.leaf:
            nd, h = nd.entries[0], h + 1
        return h

    def serialize_leaves(self) -> dict[int, bytes]:
        """Leaf id -> canonical bytes of (MBR, entries)."""
        return {
            lf.id: repr((lf.mbr.lo, lf.mbr.hi, tuple(lf.entries))).encode()
            for lf in self.leaves() if lf.entries
        }

    def check_invariants(self) -> list[str]:
        """Return a list of invariant violations (empty when the tree is sound)."""
        problems: list[str] = []
        seen: dict[int, int] = {}
        stack = [self.root]
        while stack:
            nd = stack.pop()
            is_root = nd is self.root
            if nd.leaf:
                if not is_root and not (1 <= len(nd.entries) <= self.capacity):
                    problems.append(f"leaf {nd.id} holds {len(nd.entries)} entries")
                if len(nd.entries) > self.capacity:
                    problems.append(f"leaf {nd.id} overflows")
                for key in nd.entries:
                    if key in seen:
                        problems.append(f"node {key} in leaves {seen[key]} and {nd.id}")
                    seen[key] = nd.id
                    if not nd.mbr.contains(Mbr(key, key)):
                        problems.append(f"leaf {nd.id} mbr {nd.mbr} misses key {key}")
                    if self.locator.get(key) is not nd:
                        problems.append(f"locator for {key} does not point at leaf {nd.id}")
            else:
                if not (1 <= len(nd.entries) <= self.fanout):
                    problems.append(f"internal {nd.id} has {len(nd.entries)} children")
                for ch in nd.entries:
                    if ch.parent is not nd:
                        problems.append(f"child {ch.id} has wrong parent")
                    if not nd.mbr.contains(ch.mbr):
                        problems.append(f"node {nd.id} mbr {nd.mbr} misses child {ch.id} mbr {ch.mbr}")
                    stack.append(ch)
        if set(seen) != set(self.locator):
            problems.append("locator map disagrees with leaf contents")
        return problems

    # -- mutation ------------------------------------------------------
    def _choose_leaf(self, key: int) -> _TreeNode:
        nd = self.root
        while not nd.leaf:
            nd = min(nd.entries, key=lambda c: (c.mbr.enlargement(key), c.mbr.length))
        return nd

    def insert(self, key: int) -> _TreeNode:
        if key in self.locator:
            return self.locator[key]
        leaf = self._choose_leaf(key)
        leaf.entries.append(key)
        self.locator[key] = leaf
        self.dirty.add(leaf.id)
        nd = leaf
        nd.recompute()
        while len(nd.entries) > (self.capacity if nd.leaf else self.fanout):
            nd = self._split(nd)
        # grow MBRs on the insertion path
        p = nd.parent
        while p is not None:
            p.recompute()
            p = p.parent
        return self.locator[key]

    def _split(self, nd: _TreeNode) -> _TreeNode:
        # Sorting by interval start and cutting in half gives two groups whose
        # intervals overlap as little as a 1-D split allows.
        if nd.leaf:
            nd.entries.sort()
        else:
            nd.entries.sort(key=lambda c: (c.mbr.lo, c.mbr.hi))
        half = len(nd.entries) // 2
        sibling = _TreeNode(next(self._ids), nd.leaf, nd.entries[half:])
        nd.entries = nd.entries[:half]
        if nd.leaf:
            for key in sibling.entries:
                self.locator[key] = sibling
            self._new_leaves.add(sibling.id)
            self.dirty.add(sibling.id)
        else:
            for ch in sibling.entries:
                ch.parent = sibling
        nd.recompute()
        sibling.recompute()
        parent = nd.parent
        if parent is None:
            parent = _TreeNode(next(self._ids), leaf=False, entries=[nd])
            nd.parent = parent
            self.root = parent
        sibling.parent = parent
        parent.entries.insert(parent.entries.index(nd) + 1, sibling)
        parent.recompute()
        return parent

    def update_index(self, delta: SnapshotDelta) -> DirtyReport:
        """Mark leaves hosting affected nodes dirty and repair their MBR paths."""
        self.dirty = set()
        self._new_leaves = set()
        touched: set[int] = set()
        inserted = 0
        for v in sorted(delta.affected | delta.new_nodes):
            if v in self.locator:
                leaf = self.locator[v]
                touched.add(leaf.id)
                self.dirty.add(leaf.id)
            else:
                leaf = self.insert(v)
                inserted += 1
                touched.add(leaf.id)
        dirty_nodes = {lf.id: lf for lf in self.leaves() if lf.id in self.dirty}
        for lf in dirty_nodes.values():
            lf.recompute()
            p = lf.parent
            while p is not None:
                p.recompute()
                p = p.parent
        split = len(self._new_leaves)
        touched -= self._new_leaves
        return DirtyReport(
            touched_leaves=len(touched),
            total_leaves=self.leaf_count(),
            affected_nodes=len(delta.affected),
            inserted_nodes=inserted,
            split_leaves=split,
        )

    def leaf_count(self) -> int:
        return len(self.leaves())


def component_order(graph: TemporalGraph) -> list[int]:
    """Nodes grouped by connected component, BFS order from each smallest id."""
    order: list[int] = []
    seen: set[int] = set()
    for start in sorted(graph.nodes):
        if start in seen:
            continue
        seen.add(start)
        q = deque([start])
        while q:
            v = q.popleft()
            order.append(v)
            for w in graph.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    q.append(w)
    return order


def build_index(graph: TemporalGraph, capacity: int = 64, fanout: int = 16) -> RTree:
    if graph.n == 0:
        raise ValueError("cannot index an empty graph")
    tree = RTree(capacity, fanout)
    for v in component_order(graph):
        tree.insert(v)
    tree.dirty = set()
    tree._new_leaves = set()
    return tree

