"""Command line entry point: ``rtgl <command> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from collections import defaultdict
from pathlib import Path

from . import _backend
from .bench import SUITES, best_speedup, bench_fnn, bench_mm, suite_shapes, write_bench_csv
from .fnn import Task
from .mm import Strategy, set_default_threads
from .pipeline import STAGES, load_config, parse_strategy_items, run_pipeline
from .stream import FixedCount, FixedWindow, ParseStats, bin_into_snapshots, parse_edge_stream
from .synth import gen_synthetic


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_ingest(args) -> int:
    stats = ParseStats()
    events = list(parse_edge_stream(args.dataset, args.max_malformed, stats))
    policy = FixedWindow(args.window) if args.window else FixedCount(args.snapshots)
    snaps = bin_into_snapshots(events, policy)
    nodes = {v for e in events for v in (e.src, e.dst)}
    distinct = {(e.src, e.dst) for e in events}
    print(f"lines={stats.lines} events={stats.events} self_loops={stats.self_loops} malformed={stats.malformed}")
    print(f"nodes={len(nodes)} distinct_edges={len(distinct)} snapshots={len(snaps)}")
    if events:
        sizes = [len(s.events) for s in snaps]
        times = [e.time for e in events]
        print(f"time_range=[{min(times)}, {max(times)}] max_snapshot_events={max(sizes)} "
              f"empty_snapshots={sizes.count(0)}")
    return 0


def _run_overrides(args) -> dict:
    over = {
        "dataset": args.dataset, "labels": args.labels, "out_dir": args.out, "seed": args.seed,
        "threads": args.threads, "snapshots": args.snapshots, "window": args.window,
        "batch_size": args.batch_size, "dim": args.dim, "walks_per_node": args.walks_per_node,
        "walk_length": args.walk_length, "iterations": args.iterations, "fnn_lr": args.fnn_lr,
        "neg_ratio": args.neg_ratio, "task": args.task, "n_labels": args.n_labels,
        "sgns_window": args.sgns_window, "sgns_negatives": args.sgns_negatives,
        "sgns_epochs": args.sgns_epochs, "sgns_lr": args.sgns_lr,
    }
    if args.hidden:
        over["hidden"] = _int_list(args.hidden)
    if args.window:
        over["snapshots"] = None
    if args.strategy:
        over["strategies"] = parse_strategy_items(args.strategy)
    return over


def cmd_run(args) -> int:
    cfg = load_config(args.config, **_run_overrides(args))
    if not cfg.dataset:
        print("error: no dataset given (--dataset or config key)", file=sys.stderr)
        return 2
    set_default_threads(cfg.threads)
    summary = run_pipeline(cfg)
    for k, v in summary.items():
        if isinstance(v, (int, float, str)):
            print(f"{k}={v}")
    return 0


def _strategy_list(text: str) -> list[Strategy]:
    if text == "all":
        return list(Strategy)
    return [Strategy.parse(s) for s in text.split(",")]


def cmd_bench_mm(args) -> int:
    threads = _int_list(args.threads)
    strategies = _strategy_list(args.strategies)
    rows = []
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    for suite in suites:
        if suite == "square":
            shapes = [(f"sq{n}", (n, n), (n, n)) for n in _int_list(args.sizes)]
        else:
            shapes = suite_shapes(suite, args.batch)
        rows += bench_mm(shapes, strategies, threads, args.reps, suite, args.seed)
    write_bench_csv(args.out, rows)
    for suite in suites:
        for th in threads:
            s, sp = best_speedup(rows, suite, th)
            print(f"{suite} threads={th} best={s.value} speedup={sp:.3f}")
    print(f"wrote {args.out}")
    return 0


def cmd_bench_fnn(args) -> int:
    if args.strategy and all("=" not in s for s in args.strategy):
        strategies = Strategy.parse(args.strategy[0])
    else:
        strategies = parse_strategy_items(args.strategy or [])
    res = bench_fnn(args.suite, args.batch, strategies, args.threads, args.reps, args.seed)
    total = sum(res.values())
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("label", "strategy", "threads", "nanos", "fraction"))
        for label, ns in res.items():
            strat = strategies.value if isinstance(strategies, Strategy) else \
                strategies.get(label, Strategy.ROW_WISE).value
            if label == "Others":
                strat = ""
            w.writerow((label, strat, args.threads, ns, f"{ns / total:.4f}"))
            print(f"{label:>8} {ns:>12} ns  {100 * ns / total:5.1f}%")
    print(f"wrote {args.out}")
    return 0


def cmd_gen_synth(args) -> int:
    n = gen_synthetic(args.out, args.nodes, args.communities, args.p_in, args.p_out, args.T,
                      args.seed, args.p_delete, args.labels)
    print(f"wrote {n} events to {args.out}")
    return 0


def cmd_report(args) -> int:
    d = Path(args.dir)
    metrics = d / "stage_metrics.csv"
    if metrics.exists():
        with open(metrics) as fh:
            rows = list(csv.DictReader(fh))
        print(f"snapshots: {len(rows)}")
        total = {s: sum(int(r[f"{s}_ns"]) for r in rows) for s in STAGES}
        grand = sum(total.values()) or 1
        for s, ns in total.items():
            print(f"  {s:<13} {ns / 1e9:10.4f} s  {100 * ns / grand:5.1f}%")
        final = rows[-1]["accuracy_so_far"] if rows else ""
        print(f"final accuracy: {final or 'n/a'}")
    timings = d / "kernel_timings.csv"
    if timings.exists():
        agg = defaultdict(int)
        with open(timings) as fh:
            for r in csv.DictReader(fh):
                agg[r["label"]] += int(r["nanos"])
        print("kernels:")
        for label, ns in sorted(agg.items(), key=lambda kv: -kv[1]):
            print(f"  {label:<8} {ns / 1e6:10.3f} ms")
    if not metrics.exists() and not timings.exists():
        print(f"no metrics found in {d}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtgl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="parse and bin a temporal edge list, print stats")
    ing.add_argument("dataset")
    ing.add_argument("--snapshots", type=int, default=50)
    ing.add_argument("--window", type=int)
    ing.add_argument("--max-malformed", type=int, default=100)
    ing.set_defaults(func=cmd_ingest)

    run = sub.add_parser("run", help="run the full temporal learning pipeline")
    run.add_argument("--config", help="TOML file, or bundled name 'link' / 'node'")
    run.add_argument("--dataset")
    run.add_argument("--labels")
    run.add_argument("--out")
    run.add_argument("--task", choices=[t.value for t in Task])
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--snapshots", type=int)
    run.add_argument("--window", type=int)
    run.add_argument("--batch-size", type=int)
    run.add_argument("--dim", type=int)
    run.add_argument("--hidden", help="comma separated hidden sizes")
    run.add_argument("--n-labels", type=int)
    run.add_argument("--walks-per-node", type=int)
    run.add_argument("--walk-length", type=int)
    run.add_argument("--sgns-window", type=int)
    run.add_argument("--sgns-negatives", type=int)
    run.add_argument("--sgns-epochs", type=int)
    run.add_argument("--sgns-lr", type=float)
    run.add_argument("--iterations", type=int)
    run.add_argument("--fnn-lr", type=float)
    run.add_argument("--neg-ratio", type=int)
    run.add_argument("--strategy", action="append", metavar="KERNEL=NAME")
    run.set_defaults(func=cmd_run)

    bm = sub.add_parser("bench-mm", help="benchmark matmul strategies over kernel shapes")
    bm.add_argument("--suite", default="node", choices=[*SUITES, "square", "all"])
    bm.add_argument("--batch", type=int)
    bm.add_argument("--sizes", default="64,257,1024", help="square sizes for --suite square")
    bm.add_argument("--strategies", default="all")
    bm.add_argument("--threads", default="1,2,4,8")
    bm.add_argument("--reps", type=int, default=5)
    bm.add_argument("--seed", type=int, default=0)
    bm.add_argument("--out", default="bench_mm.csv")
    bm.set_defaults(func=cmd_bench_mm)

    bf = sub.add_parser("bench-fnn", help="per-kernel breakdown of one training iteration")
    bf.add_argument("--suite", default="link", choices=list(SUITES))
    bf.add_argument("--batch", type=int)
    bf.add_argument("--strategy", action="append", metavar="NAME|KERNEL=NAME")
    bf.add_argument("--threads", type=int, default=1)
    bf.add_argument("--reps", type=int, default=5)
    bf.add_argument("--seed", type=int, default=0)
    bf.add_argument("--out", default="bench_fnn.csv")
    bf.set_defaults(func=cmd_bench_fnn)

    gs = sub.add_parser("gen-synth", help="write a stochastic block model temporal edge list")
    gs.add_argument("--nodes", type=int, default=200)
    gs.add_argument("--communities", type=int, default=2)
    gs.add_argument("--p-in", type=float, default=0.1)
    gs.add_argument("--p-out", type=float, default=0.005)
    gs.add_argument("--T", type=int, default=50)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--p-delete", type=float, default=0.0)
    gs.add_argument("--labels")
    gs.add_argument("--out", required=True)
    gs.set_defaults(func=cmd_gen_synth)

    rp = sub.add_parser("report", help="summarize metrics CSVs in an output directory")
    rp.add_argument("dir")
    rp.set_defaults(func=cmd_report)

    sub.add_parser("backend", help="print the active kernel backend").set_defaults(
        func=lambda a: print(_backend.BACKEND_NAME) or 0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
