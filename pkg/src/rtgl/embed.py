"""Skip-gram with negative sampling over walk corpora, refreshed per snapshot."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _backend

SIGMOID_CLAMP = 30.0


class UnknownNodeError(KeyError):
    pass


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -SIGMOID_CLAMP, SIGMOID_CLAMP)))


def _neg_log_sigmoid(x):
    # -log(sigmoid(x)) = log1p(exp(-x)), with x clamped like sigmoid()
    return np.log1p(np.exp(-np.clip(x, -SIGMOID_CLAMP, SIGMOID_CLAMP)))


def sgns_pair_loss(center, context, negatives) -> float:
    """-log s(u.v_o) - sum_k log s(-u.v_k) for one center/context pair."""
    u = np.asarray(center, dtype=np.float64)
    loss = _neg_log_sigmoid(u @ np.asarray(context, dtype=np.float64))
    negs = np.asarray(negatives, dtype=np.float64).reshape(-1, u.shape[0])
    if len(negs):
        loss = loss + _neg_log_sigmoid(-(negs @ u)).sum()
    return float(loss)


def sgns_pair_grad(center, context, negatives):
    """Analytic gradients of :func:`sgns_pair_loss`.

    Returns ``(d/d center, d/d context, d/d negatives)``.
    """
    u = np.asarray(center, dtype=np.float64)
    v = np.asarray(context, dtype=np.float64)
    negs = np.asarray(negatives, dtype=np.float64).reshape(-1, u.shape[0])
    e_pos = sigmoid(u @ v) - 1.0
    e_neg = sigmoid(negs @ u)
    g_u = e_pos * v + e_neg @ negs
    g_v = e_pos * u
    g_negs = e_neg[:, None] * u[None, :]
    return g_u, g_v, g_negs


@dataclass
class TrainStats:
    pairs: int = 0
    mean_loss: float = 0.0


class EmbeddingTable:
    """Input and context vectors per node, stored as rows of two arrays."""

    def __init__(self, d: int, seed: int = 0):
        if d < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.d = d
        self.seed = seed
        self.rows: dict[int, int] = {}
        self.node_ids: list[int] = []
        self._input = np.zeros((0, d))
        self._context = np.zeros((0, d))
        self.unigram: np.ndarray | None = None
        # index of the last snapshot whose walks were trained in; -1 = none
        self.version = -1

    def __len__(self) -> int:
        return len(self.node_ids)

    def __contains__(self, node: int) -> bool:
        return node in self.rows

    @property
    def input(self) -> np.ndarray:
        return self._input[: len(self.node_ids)]

    @property
    def context(self) -> np.ndarray:
        return self._context[: len(self.node_ids)]

    def add_nodes(self, nodes: Iterable[int]) -> list[int]:
        fresh = sorted(v for v in set(nodes) if v not in self.rows)
        if not fresh:
            return []
        need = len(self.node_ids) + len(fresh)
        if need > self._input.shape[0]:
            cap = max(need, 2 * self._input.shape[0], 16)
            grown_in = np.zeros((cap, self.d))
            grown_ctx = np.zeros((cap, self.d))
            grown_in[: len(self.node_ids)] = self.input
            grown_ctx[: len(self.node_ids)] = self.context
            self._input, self._context = grown_in, grown_ctx
        half = 0.5 / self.d
        for v in fresh:
            row = len(self.node_ids)
            self.rows[v] = row
            self.node_ids.append(v)
            rng = np.random.default_rng([self.seed, v])
            self._input[row] = rng.uniform(-half, half, self.d)
        return fresh

    def row_of(self, node: int) -> int:
        try:
            return self.rows[node]
        except KeyError:
            raise UnknownNodeError(f"node {node} has no embedding") from None

    def vector(self, node: int) -> np.ndarray:
        return self.input[self.row_of(node)]

    def vectors(self, nodes: Sequence[int]) -> np.ndarray:
        return self.input[[self.row_of(v) for v in nodes]]

    def rebuild_unigram(self, freqs: dict[int, int], alpha: float = 0.75) -> None:
        weights = np.zeros(len(self.node_ids))
        for v, c in freqs.items():
            if v in self.rows:
                weights[self.rows[v]] = c
        weights **= alpha
        total = weights.sum()
        self.unigram = weights / total if total > 0 else None

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.input).all() and np.isfinite(self.context).all())

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for v in sorted(self.rows):
                vec = self.input[self.rows[v]]
                fh.write(f"{v} " + " ".join(repr(float(x)) for x in vec) + "\n")


def init_embeddings(nodes: Iterable[int], d: int, seed: int = 0) -> EmbeddingTable:
    """Inputs ~ U(-0.5/d, 0.5/d) per component, contexts zero."""
    table = EmbeddingTable(d, seed)
    table.add_nodes(nodes)
    return table


def _pairs(walk_rows: list[np.ndarray], window: int) -> tuple[np.ndarray, np.ndarray]:
    """(center, context) rows in walk, center, offset order."""
    if not walk_rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    width = max(len(w) for w in walk_rows)
    grid = np.full((len(walk_rows), width), -1, dtype=np.int64)
    for i, w in enumerate(walk_rows):
        grid[i, : len(w)] = w
    offsets = np.array([o for o in range(-window, window + 1) if o != 0], dtype=np.int64)
    pos = np.arange(width)[:, None]
    ctx_pos = pos + offsets[None, :]
    in_range = (ctx_pos >= 0) & (ctx_pos < width)
    ctx_pos = np.where(in_range, ctx_pos, 0)
    centers = np.broadcast_to(grid[:, :, None], (grid.shape[0], width, len(offsets)))
    contexts = grid[:, ctx_pos]
    valid = in_range[None, :, :] & (centers >= 0) & (contexts >= 0)
    return centers[valid], contexts[valid]


def train_on_walks(table: EmbeddingTable, walks: Iterable[Sequence[int]], window: int = 5,
                   negatives: int = 5, epochs: int = 1, lr: float = 0.025, seed: int = 0,
                   min_lr: float = 1e-4, workers: int = 1, backend=None) -> TrainStats:
    """Run SGNS over ``walks`` and update ``table`` in place.

    Every in-window context of every center yields one positive update plus
    ``negatives`` sampled ones; the learning rate decays linearly from ``lr``
    towards ``min_lr`` over the call. ``workers > 1`` enables unsynchronised
    (hogwild) updates in the compiled backend.
    """
    walk_rows = [np.array([table.row_of(v) for v in w], dtype=np.int64) for w in walks]
    walk_rows = [w for w in walk_rows if len(w) > 1]
    centers, contexts = _pairs(walk_rows, window)
    if epochs > 1:
        centers = np.tile(centers, epochs)
        contexts = np.tile(contexts, epochs)
    n_pairs = len(centers)
    if n_pairs == 0:
        return TrainStats(0, 0.0)

    rng = np.random.default_rng(seed)
    probs = table.unigram
    if negatives > 0 and (probs is None or len(probs) != len(table)):
        freqs = np.bincount(np.concatenate(walk_rows), minlength=len(table)).astype(float)
        probs = freqs**0.75 / (freqs**0.75).sum()
    if negatives > 0:
        negs = rng.choice(len(table), size=(n_pairs, negatives), p=probs).astype(np.int64)
    else:
        negs = np.zeros((n_pairs, 0), dtype=np.int64)
    floor = min(min_lr, lr)
    lrs = lr - (lr - floor) * (np.arange(n_pairs) / n_pairs)

    k = _backend.get_kernels(backend) if isinstance(backend, str) else (backend or _backend.kernels)
    win, wout = table.input, table.context
    total = k.sgns_train(win, wout, np.ascontiguousarray(centers), np.ascontiguousarray(contexts),
                         negs, lrs, workers)
    if not table.all_finite():
        raise FloatingPointError("non-finite embedding component after training")
    return TrainStats(n_pairs, total / n_pairs)


def refresh_embeddings(table: EmbeddingTable, corpus, repair, t: int, window: int = 5,
                       negatives: int = 5, epochs: int = 1, lr: float = 0.025, seed: int = 0,
                       alpha: float = 0.75, workers: int = 1, backend=None) -> TrainStats:
    """Warm-start update at snapshot ``t`` from the walks repaired or created there."""
    table.add_nodes(corpus.origins.keys())
    stats = TrainStats(0, 0.0)
    if repair.walk_ids:
        table.rebuild_unigram(corpus.node_frequencies(), alpha)
        walks = [corpus.walks[w] for w in repair.walk_ids]
        stats = train_on_walks(table, walks, window, negatives, epochs, lr,
                               seed=int(np.random.SeedSequence([seed, t]).generate_state(1)[0]),
                               workers=workers, backend=backend)
    table.version = t
    return stats
