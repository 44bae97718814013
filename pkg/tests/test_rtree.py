import numpy as np
import pytest

from rtgl.rtree import Mbr, NodeNotIndexed, RTree, build_index, component_order
from rtgl.stream import EdgeEvent, EventKind, Snapshot, SnapshotDelta, TemporalGraph


def graph_from_edges(edges, nodes=()):
    g = TemporalGraph()
    for v in nodes:
        g.add_node(v)
    g.apply_snapshot(Snapshot(0, [EdgeEvent(0, a, b) for a, b in edges]))
    return g


def random_graph(n, m, seed):
    r = np.random.default_rng(seed)
    edges = set()
    while len(edges) < m:
        a, b = sorted(int(x) for x in r.choice(n, 2, replace=False))
        edges.add((a, b))
    return graph_from_edges(sorted(edges), nodes=range(n))


def leaves_scan(tree):
    return {key: lf for lf in tree.leaves() for key in lf.entries}


def test_mbr():
    a = Mbr(2, 5)
    assert a.contains(Mbr(3, 3)) and not a.contains(Mbr(1, 3))
    assert a.union(Mbr(7, 8)) == Mbr(2, 8)
    assert a.enlargement(9) == 4 and a.enlargement(3) == 0
    with pytest.raises(ValueError):
        Mbr(3, 2)


def test_singleton():
    g = TemporalGraph()
    g.add_node(42)
    tree = build_index(g, 4, 4)
    assert tree.root.leaf and tree.root.entries == [42] and tree.root.mbr == Mbr(42, 42)
    assert tree.dirty == set()


def test_capacity_bounds():
    g = random_graph(100, 150, seed=1)
    tree = build_index(g, capacity=8, fanout=4)
    leaves = tree.leaves()
    assert all(len(lf.entries) <= 8 for lf in leaves)
    assert -(-100 // 8) <= len(leaves) <= 100
    assert tree.check_invariants() == []


def test_containment_audit_1000_nodes():
    tree = build_index(random_graph(1000, 3000, seed=2), capacity=16, fanout=4)
    assert tree.check_invariants() == []
    assert len(tree) == 1000
    assert tree.height() >= 3


def test_component_order_groups_components():
    g = graph_from_edges([(0, 5), (5, 9), (1, 2)], nodes=[3])
    assert component_order(g) == [0, 5, 9, 1, 2, 3]


def test_invalid_config():
    with pytest.raises(ValueError):
        RTree(1, 4)
    with pytest.raises(ValueError):
        build_index(TemporalGraph())


def test_locate_and_unknown():
    g = random_graph(50, 60, seed=3)
    tree = build_index(g, 4, 3)
    for v in g.nodes:
        assert tree.locate(v).mbr.contains(Mbr(v, v))
    with pytest.raises(NodeNotIndexed):
        tree.locate(10_000)


def test_empty_delta_touches_nothing():
    tree = build_index(random_graph(30, 40, seed=4), 4, 4)
    rep = tree.update_index(SnapshotDelta([], [], set()))
    assert rep.touched_leaves == 0 and tree.dirty == set()


def test_colocated_pair_touches_one_leaf():
    tree = build_index(random_graph(64, 80, seed=5), 8, 4)
    leaf = tree.leaves()[0]
    a, b = leaf.entries[:2]
    rep = tree.update_index(SnapshotDelta([(min(a, b), max(a, b))], [], {a, b}))
    assert rep.touched_leaves == 1


def test_new_nodes_inserted_with_splits():
    tree = build_index(graph_from_edges([(0, 1)]), 2, 2)
    new = set(range(2, 40))
    rep = tree.update_index(SnapshotDelta([], [], set(), new))
    assert rep.inserted_nodes == 38 and rep.split_leaves > 0
    assert len(tree) == 40 and tree.check_invariants() == []


def _delta_for(graph, a, b, t):
    kind = EventKind.DELETE if graph.has_edge(a, b) else EventKind.INSERT
    return graph.apply_snapshot(Snapshot(t, [EdgeEvent(t, a, b, kind)]))


def test_partial_update_locality_and_identity():
    seed = 20261019
    r = np.random.default_rng(seed)
    g = random_graph(1000, 2500, seed=seed)
    g.next_index = 1
    tree = build_index(g, capacity=16, fanout=8)
    fractions = []
    for t in range(1, 11):
        a, b = (int(x) for x in r.choice(1000, 2, replace=False))
        before = tree.serialize_leaves()
        delta = _delta_for(g, a, b, t)
        rep = tree.update_index(delta)
        after = tree.serialize_leaves()
        for lid, blob in before.items():
            if lid not in tree.dirty:
                assert after[lid] == blob
        assert rep.touched_leaves <= len(delta.affected)
        fractions.append(rep.touched_leaves / rep.total_leaves)
        assert tree.check_invariants() == []
    assert np.mean(fractions) < 0.10


def test_locator_agrees_with_scan_after_updates():
    r = np.random.default_rng(7)
    g = random_graph(200, 300, seed=7)
    g.next_index = 1
    tree = build_index(g, 6, 3)
    for t in range(1, 51):
        a = int(r.integers(0, 260))  # ids >= 200 are new nodes
        b = int(r.integers(0, 260))
        if a == b:
            b = (b + 1) % 260
        tree.update_index(_delta_for(g, a, b, t))
    scan = leaves_scan(tree)
    assert set(scan) == set(tree.locator)
    assert all(tree.locator[k] is lf for k, lf in scan.items())
    assert tree.check_invariants() == []
