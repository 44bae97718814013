"""Dense matrix multiplication with four selectable parallel dataflows.

Matrices are C-contiguous ``float64`` numpy arrays. Each strategy partitions a
different dimension across worker threads:

* ``INNER``: rows of X; each output cell is a dot product of a row of X and a
  column of Y.
* ``ROW_WISE``: rows of X; each row of X scales rows of Y into a row of Z.
* ``COLUMN_WISE``: columns of Y; each column of Y combines columns of X into a
  column of Z.
* ``OUTER``: the shared dimension k; rank-1 updates go into private partial
  buffers that are summed afterwards in ascending lane order.

Summation over k is ascending for every cell in the first three strategies,
so they reproduce a sequential triple loop exactly at any thread count.
"""
from __future__ import annotations

import csv
import enum
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _backend

# Fixed number of k-partitions for OUTER; independent of thread count so that
# results are reproducible bit for bit across thread counts.
OUTER_LANES = 16

_default_threads = int(os.environ.get("RTGL_THREADS", "1"))


class ShapeError(ValueError):
    pass


class Strategy(enum.Enum):
    INNER = "inner"
    OUTER = "outer"
    ROW_WISE = "rowwise"
    COLUMN_WISE = "colwise"

    @classmethod
    def parse(cls, text: str | "Strategy") -> "Strategy":
        if isinstance(text, Strategy):
            return text
        key = text.strip().lower().replace("-", "").replace("_", "")
        aliases = {"row": "rowwise", "column": "colwise", "columnwise": "colwise", "col": "colwise"}
        key = aliases.get(key, key)
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown matmul strategy {text!r}")


@dataclass(frozen=True)
class KernelTiming:
    label: str
    strategy: Strategy
    threads: int
    nanos: int


def set_default_threads(n: int) -> None:
    global _default_threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = n


def default_threads() -> int:
    return _default_threads


def as_matrix(a) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def transpose(X) -> np.ndarray:
    """Materialized row-major transpose."""
    return np.ascontiguousarray(as_matrix(X).T)


def effective_threads(shape_x, shape_y, strategy: Strategy, threads: int) -> int:
    """Clamp a requested thread count to the partitioned dimension."""
    n, kd = shape_x
    m = shape_y[1]
    if strategy in (Strategy.INNER, Strategy.ROW_WISE):
        limit = n
    elif strategy is Strategy.COLUMN_WISE:
        limit = m
    else:
        limit = min(kd, OUTER_LANES)
    return max(1, min(threads, limit))


def _plan(X, Y, strategy: Strategy, threads: int, outer_atomic: bool, backend):
    X = as_matrix(X)
    Y = as_matrix(Y)
    if X.shape[1] != Y.shape[0]:
        raise ShapeError(f"cannot multiply {X.shape} by {Y.shape}")
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    k = backend if backend is not None else _backend.kernels
    if isinstance(k, str):
        k = _backend.get_kernels(k)
    n, kd = X.shape
    m = Y.shape[1]
    Z = np.zeros((n, m))
    nt = effective_threads(X.shape, Y.shape, strategy, threads)
    if n == 0 or m == 0 or kd == 0:
        return Z, nt, (lambda: None)

    if strategy is Strategy.INNER:
        colbuf = np.empty((nt, kd))
        run = lambda: k.mm_inner(X, Y, Z, colbuf, nt)  # noqa: E731
    elif strategy is Strategy.ROW_WISE:
        run = lambda: k.mm_rowwise(X, Y, Z, nt)  # noqa: E731
    elif strategy is Strategy.COLUMN_WISE:
        colbuf = np.empty((nt, n))

        def run():
            Xt = np.ascontiguousarray(X.T)
            k.mm_colwise(Xt, Y, Z, colbuf, nt)
    elif outer_atomic:
        nt = max(1, min(threads, kd))
        run = lambda: k.mm_outer_atomic(X, Y, Z, nt)  # noqa: E731
    else:
        partial = np.zeros((min(kd, OUTER_LANES), n, m))
        run = lambda: k.mm_outer(X, Y, Z, partial, nt)  # noqa: E731
    return Z, nt, run


def matmul(X, Y, strategy: Strategy | str = Strategy.ROW_WISE, threads: int | None = None,
           *, outer_atomic: bool = False, backend=None) -> np.ndarray:
    """Compute ``X @ Y`` with the given dataflow and thread count.

    ``outer_atomic`` switches OUTER to direct atomic accumulation into Z
    (non-deterministic rounding). ``backend`` may name "compiled"/"python".
    """
    strategy = Strategy.parse(strategy)
    threads = _default_threads if threads is None else threads
    Z, _, run = _plan(X, Y, strategy, threads, outer_atomic, backend)
    run()
    return Z


def matmul_timed(X, Y, strategy: Strategy | str = Strategy.ROW_WISE, threads: int | None = None,
                 label: str = "", *, outer_atomic: bool = False, backend=None):
    """Like :func:`matmul` but also returns a :class:`KernelTiming`.

    Output and scratch buffers are allocated before the clock starts.
    """
    strategy = Strategy.parse(strategy)
    threads = _default_threads if threads is None else threads
    Z, _, run = _plan(X, Y, strategy, threads, outer_atomic, backend)
    t0 = time.perf_counter_ns()
    run()
    elapsed = time.perf_counter_ns() - t0
    return Z, KernelTiming(label, strategy, threads, max(0, elapsed))


TIMING_FIELDS = ("label", "strategy", "threads", "nanos")


def write_timings_csv(path: str | Path, timings: Iterable[KernelTiming], append: bool = False) -> None:
    path = Path(path)
    new = not append or not path.exists()
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(TIMING_FIELDS)
        for t in timings:
            w.writerow((t.label, t.strategy.value, t.threads, t.nanos))
