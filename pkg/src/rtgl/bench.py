"""Matmul and FNN-iteration benchmarks with CSV output."""
from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fnn import LINK_SIZES, NODE_SIZES, KernelRecorder, LabeledBatch, init_model, kernel_shapes, train_batch_online
from .mm import Strategy, matmul_timed

SUITES = {"link": LINK_SIZES, "node": NODE_SIZES}


@dataclass
class BenchRow:
    suite: str
    label: str
    strategy: Strategy
    threads: int
    median_nanos: int
    speedup: float = float("nan")


def suite_shapes(suite: str, batch: int | None = None):
    sizes = SUITES[suite]
    if batch is None:
        batch = 1024 if suite == "link" else 512
    return kernel_shapes(sizes, batch)


def _normalize(rows: list[BenchRow]) -> None:
    """speedup = median(row-wise at 1 thread) / median, per kernel label."""
    base = {(r.suite, r.label): r.median_nanos for r in rows
            if r.strategy is Strategy.ROW_WISE and r.threads == 1}
    for r in rows:
        ref = base.get((r.suite, r.label))
        r.speedup = ref / r.median_nanos if ref and r.median_nanos else float("nan")


def add_totals(rows: list[BenchRow]) -> list[BenchRow]:
    """Append one ``TOTAL`` row per (suite, strategy, threads) summing kernel medians."""
    sums: dict[tuple, int] = {}
    for r in rows:
        if r.label == "TOTAL":
            continue
        key = (r.suite, r.strategy, r.threads)
        sums[key] = sums.get(key, 0) + r.median_nanos
    out = [r for r in rows if r.label != "TOTAL"]
    out += [BenchRow(s, "TOTAL", st, th, n) for (s, st, th), n in sums.items()]
    _normalize(out)
    return out


def bench_mm(shapes: Iterable[tuple[str, tuple[int, int], tuple[int, int]]],
             strategies: Sequence[Strategy] = tuple(Strategy), threads: Sequence[int] = (1, 2, 4, 8),
             reps: int = 5, suite: str = "custom", seed: int = 0, backend=None) -> list[BenchRow]:
    """Median-of-``reps`` wall time for every (kernel, strategy, threads)."""
    rng = np.random.default_rng(seed)
    rows = []
    for label, sx, sy in shapes:
        X = rng.standard_normal(sx)
        Y = rng.standard_normal(sy)
        for s in strategies:
            for th in threads:
                samples = [matmul_timed(X, Y, s, th, label, backend=backend)[1].nanos for _ in range(reps)]
                rows.append(BenchRow(suite, label, s, th, int(statistics.median(samples))))
    return add_totals(rows)


def best_speedup(rows: list[BenchRow], suite: str, threads: int) -> tuple[Strategy, float]:
    """Best suite-total speedup at ``threads`` relative to row-wise at 1 thread."""
    cands = [r for r in rows if r.suite == suite and r.label == "TOTAL" and r.threads == threads]
    best = max(cands, key=lambda r: r.speedup)
    return best.strategy, best.speedup


BENCH_FIELDS = ("suite", "label", "strategy", "threads", "median_nanos", "speedup")


def write_bench_csv(path: str | Path, rows: Iterable[BenchRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_FIELDS)
        for r in rows:
            w.writerow((r.suite, r.label, r.strategy.value, r.threads, r.median_nanos, f"{r.speedup:.4f}"))


def bench_fnn(suite: str = "link", batch: int | None = None, strategies=None, threads: int = 1,
              reps: int = 5, seed: int = 0) -> dict[str, int]:
    """Median per-kernel nanoseconds of one training iteration (plus ``Others``)."""
    sizes = SUITES[suite]
    if batch is None:
        batch = 1024 if suite == "link" else 512
    rng = np.random.default_rng(seed)
    model = init_model(sizes, 0.01, seed)
    X = rng.standard_normal((batch, sizes[0]))
    if sizes[-1] == 1:
        T = rng.integers(0, 2, (batch, 1)).astype(float)
    else:
        T = np.eye(sizes[-1])[rng.integers(0, sizes[-1], batch)]
    samples: dict[str, list[int]] = {}
    for _ in range(reps):
        rec = KernelRecorder()
        train_batch_online(model, LabeledBatch(X, T), 1, strategies, threads, rec)
        for t in rec.timings:
            samples.setdefault(t.label, []).append(t.nanos)
        samples.setdefault("Others", []).append(rec.other_nanos)
    return {label: int(statistics.median(v)) for label, v in samples.items()}
