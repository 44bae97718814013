"""Time the compiled kernels against the numpy fallback.

Covers every matmul strategy on the link/node kernel shapes plus a square
case, and one SGNS training call on a synthetic walk corpus. Both backends
must produce the same matmul result; the script checks that before timing.

    python3 benchmarks/compare_backends.py --reps 3 --threads 1 --out backends.csv
"""
from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from rtgl import _backend
from rtgl.bench import suite_shapes
from rtgl.embed import init_embeddings, train_on_walks
from rtgl.mm import Strategy, matmul, matmul_timed
from rtgl.stream import EdgeEvent, Snapshot, TemporalGraph
from rtgl.synth import sbm_events
from rtgl.walks import init_corpus


def mm_rows(reps, threads, square):
    rng = np.random.default_rng(0)
    shapes = [(f"link:{lab}", a, b) for lab, a, b in suite_shapes("link")]
    shapes += [(f"node:{lab}", a, b) for lab, a, b in suite_shapes("node")]
    shapes.append((f"sq{square}", (square, square), (square, square)))
    for label, sx, sy in shapes:
        X, Y = rng.standard_normal(sx), rng.standard_normal(sy)
        for s in Strategy:
            if not np.array_equal(matmul(X, Y, s, threads, backend="compiled"),
                                  matmul(X, Y, s, threads, backend="python")) and s is not Strategy.OUTER:
                raise SystemExit(f"backends disagree on {label} / {s.value}")
            med = {}
            for name in ("compiled", "python"):
                ns = [matmul_timed(X, Y, s, threads, label, backend=name)[1].nanos for _ in range(reps)]
                med[name] = statistics.median(ns)
            yield ("matmul", label, s.value, threads, med["compiled"], med["python"])


def sgns_rows(reps):
    g = TemporalGraph()
    g.apply_snapshot(Snapshot(0, [EdgeEvent(0, a, b) for a, b, _, _ in sbm_events(200, 2, 0.1, 0.005, 1, 7)]))
    corpus = init_corpus(g, r=2, l=20, seed=0)
    med = {}
    for name in ("compiled", "python"):
        ns = []
        for _ in range(reps):
            table = init_embeddings(g.nodes, 8)
            t0 = time.perf_counter_ns()
            stats = train_on_walks(table, corpus.walks, backend=name)
            ns.append(time.perf_counter_ns() - t0)
        med[name] = statistics.median(ns)
    yield ("sgns", f"{stats.pairs} pairs", "", 1, med["compiled"], med["python"])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--square", type=int, default=257)
    ap.add_argument("--out", help="optional CSV path")
    args = ap.parse_args(argv)
    try:
        _backend.get_kernels("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1

    rows = list(mm_rows(args.reps, args.threads, args.square)) + list(sgns_rows(args.reps))
    print(f"{'kind':<7} {'label':<14} {'strategy':<8} {'compiled ms':>12} {'python ms':>11} {'ratio':>7}")
    for kind, label, strat, _, c, p in rows:
        print(f"{kind:<7} {label:<14} {strat:<8} {c / 1e6:12.3f} {p / 1e6:11.3f} {p / c:7.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("kind", "label", "strategy", "threads", "compiled_ns", "python_ns"))
            w.writerows((k, lab, s, th, int(c), int(p)) for k, lab, s, th, c, p in rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
