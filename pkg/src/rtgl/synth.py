"""Stochastic-block-model temporal edge lists for tests and demos."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def block_sizes(nodes: int, communities: int) -> list[int]:
    base, extra = divmod(nodes, communities)
    return [base + (1 if c < extra else 0) for c in range(communities)]


def community_of(nodes: int, communities: int) -> np.ndarray:
    return np.repeat(np.arange(communities), block_sizes(nodes, communities))


def sbm_events(nodes: int, communities: int, p_in: float, p_out: float, T: int, seed: int = 0,
               p_delete: float = 0.0) -> list[tuple[int, int, int, bool]]:
    """(src, dst, time, is_delete) tuples sorted by time.

    Each node pair becomes an edge with probability ``p_in`` inside a block
    and ``p_out`` across blocks, arriving at a uniform time in ``[0, T)``.
    With ``p_delete`` > 0 an edge is removed again at a later uniform time.
    """
    for name, p in (("p_in", p_in), ("p_out", p_out), ("p_delete", p_delete)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    if nodes < 1 or communities < 1 or T < 1:
        raise ValueError("nodes, communities and T must all be >= 1")
    rng = np.random.default_rng(seed)
    comm = community_of(nodes, communities)
    src, dst = np.triu_indices(nodes, k=1)
    prob = np.where(comm[src] == comm[dst], p_in, p_out)
    keep = rng.random(len(src)) < prob
    src, dst = src[keep], dst[keep]
    times = rng.integers(0, T, size=len(src))
    events = [(int(a), int(b), int(t), False) for a, b, t in zip(src, dst, times)]
    if p_delete > 0:
        drop = rng.random(len(src)) < p_delete
        for a, b, t in zip(src[drop], dst[drop], times[drop]):
            if t + 1 < T:
                events.append((int(a), int(b), int(rng.integers(t + 1, T)), True))
    events.sort(key=lambda e: e[2])
    return events


def gen_synthetic(path: str | Path, nodes: int, communities: int, p_in: float, p_out: float, T: int,
                  seed: int = 0, p_delete: float = 0.0, labels_path: str | Path | None = None) -> int:
    """Write an SBM temporal edge list (``src dst time``); returns the line count.

    Optionally writes ``node community`` labels for node classification.
    """
    events = sbm_events(nodes, communities, p_in, p_out, T, seed, p_delete)
    with open(path, "w") as fh:
        fh.write(f"# sbm nodes={nodes} communities={communities} p_in={p_in} p_out={p_out} T={T} seed={seed}\n")
        for a, b, t, is_del in events:
            fh.write(f"{'-' if is_del else ''}{a} {b} {t}\n")
    if labels_path is not None:
        comm = community_of(nodes, communities)
        with open(labels_path, "w") as fh:
            for v, c in enumerate(comm):
                fh.write(f"{v} {c}\n")
    return len(events)
