"""Training batches built from a snapshot, plus accuracy evaluation."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .embed import EmbeddingTable
from .fnn import FnnModel, LabeledBatch, Task, forward
from .stream import SnapshotDelta, TemporalGraph


class CausalityError(RuntimeError):
    pass


def _check_version(embeddings: EmbeddingTable, t: int | None) -> None:
    if t is not None and embeddings.version > t:
        raise CausalityError(f"embeddings at version {embeddings.version} used for snapshot {t}")


def build_link_batch(delta: SnapshotDelta, graph: TemporalGraph, embeddings: EmbeddingTable,
                     B: int, neg_ratio: int = 1, seed: int = 0, t: int | None = None) -> LabeledBatch | None:
    """Positives from edges added in ``delta``, negatives from absent node pairs.

    Rows are ``[emb(a), emb(b)]``. Returns ``None`` when the snapshot added no
    edges. The batch holds at most ``B`` rows.
    """
    _check_version(embeddings, t)
    if B < 1:
        raise ValueError("batch size must be >= 1")
    if not delta.added:
        return None
    rng = np.random.default_rng(seed)
    pos = sorted(delta.added)
    cap = max(1, B // (1 + neg_ratio))
    if len(pos) > cap:
        pick = np.sort(rng.choice(len(pos), size=cap, replace=False))
        pos = [pos[i] for i in pick]

    nodes = np.array(sorted(graph.nodes))
    want = len(pos) * neg_ratio
    negs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    budget = 50 * want + 100
    while len(negs) < want and budget > 0 and len(nodes) > 1:
        # draw candidates in chunks; rejected ones (self pairs, repeats, live edges) are dropped
        chunk = min(budget, 2 * (want - len(negs)) + 16)
        budget -= chunk
        ia = rng.integers(0, len(nodes), chunk)
        ib = rng.integers(0, len(nodes), chunk)
        for a, b in zip(nodes[np.minimum(ia, ib)].tolist(), nodes[np.maximum(ia, ib)].tolist()):
            if a == b or (a, b) in seen or graph.has_edge(a, b):
                continue
            seen.add((a, b))
            negs.append((a, b))
            if len(negs) == want:
                break

    pairs = pos + negs
    labels = np.array([1.0] * len(pos) + [0.0] * len(negs))
    X = np.hstack([embeddings.vectors([a for a, _ in pairs]), embeddings.vectors([b for _, b in pairs])])
    order = rng.permutation(len(pairs))
    return LabeledBatch(np.ascontiguousarray(X[order]), labels[order, None].copy(),
                        [pairs[i] for i in order])


def read_labels(path: str | Path) -> dict[int, int]:
    labels: dict[int, int] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            v, c = line.split()[:2]
            labels[int(v)] = int(c)
    return labels


def build_node_batch(labels: dict[int, int], affected, embeddings: EmbeddingTable, B: int, L: int,
                     seed: int = 0, t: int | None = None) -> tuple[LabeledBatch | None, int]:
    """Rows are embeddings of up to ``B`` affected labeled nodes (random labeled nodes if none).

    Returns the batch (``None`` if empty) and the number of nodes skipped for
    lacking a label.
    """
    _check_version(embeddings, t)
    rng = np.random.default_rng(seed)
    candidates = sorted(v for v in affected if v in embeddings)
    missing = sum(1 for v in candidates if v not in labels)
    chosen = [v for v in candidates if v in labels]
    if not chosen:
        pool = sorted(v for v in labels if v in embeddings)
        if not pool:
            return None, missing
        chosen = [pool[i] for i in rng.choice(len(pool), size=min(B, len(pool)), replace=False)]
    if len(chosen) > B:
        chosen = [chosen[i] for i in np.sort(rng.choice(len(chosen), size=B, replace=False))]
    chosen = [chosen[i] for i in rng.permutation(len(chosen))]
    targets = np.zeros((len(chosen), L))
    for r, v in enumerate(chosen):
        c = labels[v]
        if not 0 <= c < L:
            raise ValueError(f"label {c} of node {v} outside [0, {L})")
        targets[r, c] = 1.0
    return LabeledBatch(embeddings.vectors(chosen), targets), missing


def accuracy_from_outputs(R2: np.ndarray, targets: np.ndarray) -> float:
    if len(R2) == 0:
        raise ValueError("cannot evaluate an empty batch")
    if R2.shape[1] == 1:
        pred = R2[:, 0] >= 0.5
        correct = pred == (targets[:, 0] >= 0.5)
    else:
        correct = np.argmax(R2, axis=1) == np.argmax(targets, axis=1)
    return float(correct.mean())


def evaluate(model: FnnModel, batch: LabeledBatch, task: Task | None = None,
             strategies=None, threads=None) -> float:
    """Fraction correct: ``R2 >= 0.5`` for links, argmax (lowest index on ties) for classes."""
    return accuracy_from_outputs(forward(model, batch.X, strategies, threads).R2, batch.targets)
