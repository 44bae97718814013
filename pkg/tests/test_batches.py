import numpy as np
import pytest

from rtgl.batches import (
    CausalityError, accuracy_from_outputs, build_link_batch, build_node_batch, evaluate, read_labels,
)
from rtgl.embed import init_embeddings
from rtgl.fnn import FnnModel, LabeledBatch, init_model
from rtgl.stream import EdgeEvent, Snapshot, TemporalGraph


def graph_with(edges):
    g = TemporalGraph()
    delta = g.apply_snapshot(Snapshot(0, [EdgeEvent(0, a, b) for a, b in edges]))
    return g, delta


def test_link_row_width():
    g, delta = graph_with([(0, 1), (2, 3)])
    emb = init_embeddings(g.nodes, 8)
    b = build_link_batch(delta, g, emb, B=1024)
    assert b.X.shape[1] == 16
    row = b.pairs.index((0, 1))
    assert np.array_equal(b.X[row], np.concatenate([emb.vector(0), emb.vector(1)]))
    assert set(np.unique(b.targets)) <= {0.0, 1.0}


def test_negative_ratio_arithmetic():
    edges = [(i, i + 1) for i in range(0, 200, 2)]
    g, delta = graph_with(edges)
    b = build_link_batch(delta, g, init_embeddings(g.nodes, 4), B=1024, neg_ratio=1)
    assert len(b) == 200 and b.targets.sum() == 100
    b3 = build_link_batch(delta, g, init_embeddings(g.nodes, 4), B=1024, neg_ratio=3)
    assert len(b3) == 400


def test_batch_is_capped():
    edges = [(i, j) for i in range(30) for j in range(i + 1, 30) if (i + j) % 3]
    g, delta = graph_with(edges)
    b = build_link_batch(delta, g, init_embeddings(g.nodes, 4), B=64)
    assert len(b) == 64 and b.targets.sum() == 32


def test_negatives_are_absent_edges():
    rng = np.random.default_rng(0)
    edges = {tuple(sorted(int(x) for x in rng.choice(80, 2, replace=False))) for _ in range(600)}
    g, delta = graph_with(sorted(edges))
    emb = init_embeddings(g.nodes, 4)
    violations = sampled = 0
    seed = 0
    while sampled < 10_000:
        b = build_link_batch(delta, g, emb, B=4096, neg_ratio=5, seed=seed)
        for (a, c), y in zip(b.pairs, b.targets[:, 0]):
            if y == 0:
                sampled += 1
                violations += g.has_edge(a, c)
        seed += 1
    assert violations == 0


def test_no_added_edges_signals_empty():
    g, _ = graph_with([(0, 1)])
    delta = g.apply_snapshot(Snapshot(1, []))
    assert build_link_batch(delta, g, init_embeddings(g.nodes, 4), 16) is None


def test_link_batch_deterministic():
    g, delta = graph_with([(i, i + 1) for i in range(20)])
    emb = init_embeddings(g.nodes, 4)
    a = build_link_batch(delta, g, emb, 32, seed=3)
    b = build_link_batch(delta, g, emb, 32, seed=3)
    assert a.pairs == b.pairs and np.array_equal(a.X, b.X)


def test_causality_guard():
    g, delta = graph_with([(0, 1)])
    emb = init_embeddings(g.nodes, 4)
    emb.version = 1
    with pytest.raises(CausalityError):
        build_link_batch(delta, g, emb, 8, t=0)
    with pytest.raises(CausalityError):
        build_node_batch({0: 1}, {0}, emb, 8, 2, t=0)
    emb.version = 0
    assert build_link_batch(delta, g, emb, 8, t=0) is not None


def test_node_batch_one_hot():
    emb = init_embeddings(range(10), 64)
    labels = {v: v % 10 for v in range(8)}
    b, missing = build_node_batch(labels, {0, 3, 5, 9}, emb, B=512, L=10)
    assert b.X.shape == (3, 64) and missing == 1
    assert np.all(b.targets.sum(axis=1) == 1) and b.targets.shape[1] == 10
    for x, y in zip(b.X, b.targets):
        v = next(v for v in (0, 3, 5) if np.array_equal(emb.vector(v), x))
        assert np.argmax(y) == labels[v]


def test_node_batch_falls_back_to_labeled_nodes():
    emb = init_embeddings(range(10), 4)
    b, missing = build_node_batch({1: 0, 2: 1}, {9}, emb, B=8, L=2)
    assert len(b) == 2 and missing == 1


def test_node_batch_label_out_of_range():
    emb = init_embeddings(range(3), 4)
    with pytest.raises(ValueError):
        build_node_batch({0: 5}, {0}, emb, B=8, L=2)


def test_read_labels(tmp_path):
    p = tmp_path / "l.txt"
    p.write_text("# header\n0 3\n\n7 1 extra\n")
    assert read_labels(p) == {0: 3, 7: 1}


def test_accuracy_rules():
    T = np.array([[1.0], [0.0], [1.0]])
    assert accuracy_from_outputs(np.array([[0.9], [0.1], [0.7]]), T) == 1.0
    assert accuracy_from_outputs(np.array([[0.5], [0.5], [0.5]]), T) == pytest.approx(2 / 3)
    tie = np.array([[0.4, 0.4, 0.2]])
    assert accuracy_from_outputs(tie, np.array([[1.0, 0, 0]])) == 1.0
    assert accuracy_from_outputs(tie, np.array([[0, 1.0, 0]])) == 0.0
    with pytest.raises(ValueError):
        accuracy_from_outputs(np.zeros((0, 1)), np.zeros((0, 1)))


def test_untrained_model_is_at_chance():
    rng = np.random.default_rng(2)
    model = init_model((16, 128, 1), seed=4)
    X = rng.uniform(-1 / 16, 1 / 16, size=(1000, 16))
    T = np.repeat([[1.0], [0.0]], 500, axis=0)
    assert abs(evaluate(model, LabeledBatch(X, T)) - 0.5) <= 0.05


def test_evaluate_zero_model_counts_positive():
    model = FnnModel([np.zeros((4, 2)), np.zeros((2, 1))], 0.1)
    b = LabeledBatch(np.ones((4, 4)), np.array([[1.0], [1.0], [0.0], [0.0]]))
    assert evaluate(model, b) == 0.5
