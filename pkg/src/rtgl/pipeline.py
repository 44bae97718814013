"""Per-snapshot orchestration: construct, repair walks, embed, batch, train, evaluate."""
from __future__ import annotations

import csv
import dataclasses
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .batches import accuracy_from_outputs, build_link_batch, build_node_batch, read_labels
from .embed import EmbeddingTable, refresh_embeddings
from .fnn import KernelRecorder, Task, dump_model, forward, init_model, train_batch_online
from .mm import Strategy, write_timings_csv, KernelTiming
from .rtree import build_index
from .stream import FixedCount, FixedWindow, ParseStats, TemporalGraph, bin_into_snapshots, parse_edge_stream
from .walks import RepairReport, init_corpus

log = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent / "configs"


@dataclass
class PipelineConfig:
    dataset: str = ""
    task: Task = Task.LINK
    labels: str | None = None
    snapshots: int | None = 50
    window: int | None = None
    batch_size: int = 1024
    dim: int = 8
    walks_per_node: int = 10
    walk_length: int = 20
    sgns_window: int = 5
    sgns_negatives: int = 5
    sgns_epochs: int = 1
    sgns_lr: float = 0.025
    hidden: list[int] = field(default_factory=lambda: [128])
    n_labels: int = 1
    iterations: int = 10
    fnn_lr: float = 0.3
    neg_ratio: int = 1
    holdout: float = 0.2
    strategies: dict[str, Strategy] = field(default_factory=dict)
    threads: int = 1
    seed: int = 0
    out_dir: str = "out"
    rtree_capacity: int = 64
    rtree_fanout: int = 16
    max_malformed: int = 100

    def __post_init__(self):
        self.task = Task(self.task) if not isinstance(self.task, Task) else self.task
        self.strategies = {k: Strategy.parse(v) for k, v in dict(self.strategies).items()}
        self.hidden = [int(h) for h in self.hidden]
        if self.task is Task.LINK:
            self.n_labels = 1
        self.validate()

    def validate(self) -> None:
        for name in ("batch_size", "dim", "iterations", "walks_per_node", "walk_length", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.snapshots is None and self.window is None:
            raise ValueError("one of snapshots or window is required")
        if self.task is Task.NODE and self.n_labels < 2:
            raise ValueError("node classification needs n_labels >= 2")
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError("holdout must lie in [0, 1)")

    @property
    def input_dim(self) -> int:
        return 2 * self.dim if self.task is Task.LINK else self.dim

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.n_labels]

    @property
    def policy(self):
        return FixedWindow(self.window) if self.window else FixedCount(self.snapshots)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def parse_strategy_items(items) -> dict[str, Strategy]:
    """Accept a mapping or ``kernel=name`` strings."""
    if isinstance(items, dict):
        return {k: Strategy.parse(v) for k, v in items.items()}
    out = {}
    for item in items:
        kernel, _, name = item.partition("=")
        if not name:
            raise ValueError(f"expected kernel=strategy, got {item!r}")
        out[kernel.strip()] = Strategy.parse(name)
    return out


def load_config(path: str | Path | None = None, **overrides: Any) -> PipelineConfig:
    """Read a flat TOML config (bundled names ``link``/``node`` allowed) and apply overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists() and (CONFIG_DIR / f"{path}.toml").exists():
            p = CONFIG_DIR / f"{path}.toml"
        with open(p, "rb") as fh:
            values = tomllib.load(fh)
        # data paths in a config file are relative to that file
        for key in ("dataset", "labels"):
            v = values.get(key)
            if v and not Path(v).is_absolute():
                values[key] = str((p.parent / v).resolve())
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "strategies" in values:
        values["strategies"] = parse_strategy_items(values["strategies"])
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**values)


STAGES = ("construction", "walk", "word2vec", "batch", "training")
METRIC_FIELDS = (
    "t", "events", "added", "removed", "affected", "nodes", "edges",
    *(f"{s}_ns" for s in STAGES),
    "touched_leaves", "total_leaves", "walks_updated", "positions_preserved", "walks_created",
    "sgns_pairs", "sgns_loss", "batch_rows", "train_loss", "holdout_rows", "holdout_acc", "accuracy_so_far",
)


@dataclass
class StageMetrics:
    t: int
    values: dict[str, Any] = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        return {"t": self.t, **self.values}


class PipelineError(RuntimeError):
    def __init__(self, t: int, cause: BaseException):
        super().__init__(f"pipeline failed at snapshot {t}: {cause}")
        self.t = t


def _fmt(v):
    if isinstance(v, float):
        return "" if np.isnan(v) else repr(v)
    return v


def run_pipeline(config: PipelineConfig, write: bool = True) -> dict[str, Any]:
    """Process every snapshot of ``config.dataset`` and return a summary dict."""
    cfg = config
    stats = ParseStats()
    events = list(parse_edge_stream(cfg.dataset, cfg.max_malformed, stats))
    snaps = bin_into_snapshots(events, cfg.policy)
    labels = read_labels(cfg.labels) if cfg.task is Task.NODE else {}

    graph = TemporalGraph()
    tree = None
    corpus = None
    table = EmbeddingTable(cfg.dim, cfg.seed)
    model = init_model(cfg.sizes, cfg.fnn_lr, cfg.seed)
    recorder = KernelRecorder()
    metrics: list[StageMetrics] = []
    correct = 0
    held = 0
    totals = {s: 0 for s in STAGES}
    missing_labels = 0

    for snap in snaps:
        t = snap.index
        m = StageMetrics(t)
        try:
            clock = time.perf_counter_ns()

            def lap(stage):
                nonlocal clock
                now = time.perf_counter_ns()
                m.values[f"{stage}_ns"] = now - clock
                totals[stage] += now - clock
                clock = now

            delta = graph.apply_snapshot(snap)
            touched = total_leaves = 0
            if tree is None and graph.n:
                tree = build_index(graph, cfg.rtree_capacity, cfg.rtree_fanout)
                touched = total_leaves = tree.leaf_count()
            elif tree is not None:
                rep = tree.update_index(delta)
                touched, total_leaves = rep.touched_leaves, rep.total_leaves
            lap("construction")

            if corpus is None and graph.n:
                corpus = init_corpus(graph, cfg.walks_per_node, cfg.walk_length, cfg.seed)
                repair = RepairReport(walks_created=len(corpus), walk_ids=list(range(len(corpus))))
            elif corpus is not None:
                repair = corpus.repair_walks(graph, delta, t, cfg.threads)
            else:
                repair = RepairReport()
            lap("walk")

            sg = refresh_embeddings(table, corpus, repair, t, cfg.sgns_window, cfg.sgns_negatives,
                                    cfg.sgns_epochs, cfg.sgns_lr, cfg.seed) if corpus is not None else None
            lap("word2vec")

            bseed = int(np.random.SeedSequence([cfg.seed, t, 1]).generate_state(1)[0])
            if cfg.task is Task.LINK:
                batch = build_link_batch(delta, graph, table, cfg.batch_size, cfg.neg_ratio, bseed, t)
            else:
                batch, miss = build_node_batch(labels, delta.affected, table, cfg.batch_size,
                                               cfg.n_labels, bseed, t)
                missing_labels += miss
            train = hold = None
            if batch is not None and len(batch):
                n = len(batch)
                n_hold = int(np.floor(cfg.holdout * n + 0.5))
                n_hold = min(n_hold, n - 1)
                perm = np.random.default_rng([cfg.seed, t, 2]).permutation(n)
                hold = batch.take(perm[:n_hold]) if n_hold > 0 else None
                train = batch.take(perm[n_hold:])
            lap("batch")

            train_loss = float("nan")
            acc = float("nan")
            if train is not None:
                losses = train_batch_online(model, train, cfg.iterations, cfg.strategies, cfg.threads, recorder)
                train_loss = losses[-1]
            if hold is not None:
                R2 = forward(model, hold.X, cfg.strategies, cfg.threads, recorder).R2
                acc = accuracy_from_outputs(R2, hold.targets)
                correct += int(round(acc * len(hold)))
                held += len(hold)
            lap("training")
        except Exception as exc:
            raise PipelineError(t, exc) from exc

        m.values.update(
            events=len(snap.events), added=len(delta.added), removed=len(delta.removed),
            affected=len(delta.affected), nodes=graph.n, edges=graph.m,
            touched_leaves=touched, total_leaves=total_leaves,
            walks_updated=repair.walks_updated, positions_preserved=repair.positions_preserved,
            walks_created=repair.walks_created,
            sgns_pairs=sg.pairs if sg else 0, sgns_loss=sg.mean_loss if sg else float("nan"),
            batch_rows=len(batch) if batch is not None else 0, train_loss=train_loss,
            holdout_rows=len(hold) if hold is not None else 0, holdout_acc=acc,
            accuracy_so_far=correct / held if held else float("nan"),
        )
        metrics.append(m)
        log.debug("t=%d %s", t, m.values)

    summary = {
        "snapshots": len(snaps),
        "events": stats.events,
        "self_loops": stats.self_loops,
        "malformed": stats.malformed,
        "nodes": graph.n,
        "edges": graph.m,
        "heldout_rows": held,
        "final_accuracy": correct / held if held else float("nan"),
        "missing_labels": missing_labels,
        **{f"total_{s}_ns": v for s, v in totals.items()},
    }
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(out / "stage_metrics.csv", metrics)
        write_timings_csv(out / "kernel_timings.csv", aggregate_timings(recorder))
        dump_model(model, out / "model.txt")
        with open(out / "summary.txt", "w") as fh:
            for k, v in summary.items():
                fh.write(f"{k}={v}\n")
    # live objects for callers that inspect the final state; not written to disk
    summary.update(metrics=metrics, graph=graph, corpus=corpus, embeddings=table, model=model)
    return summary


def aggregate_timings(recorder: KernelRecorder) -> list[KernelTiming]:
    sums: dict[tuple, int] = {}
    for t in recorder.timings:
        key = (t.label, t.strategy, t.threads)
        sums[key] = sums.get(key, 0) + t.nanos
    return [KernelTiming(l, s, th, n) for (l, s, th), n in sums.items()]


def write_metrics_csv(path: str | Path, metrics: list[StageMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        w.writeheader()
        for m in metrics:
            w.writerow({k: _fmt(v) for k, v in m.row().items()})
