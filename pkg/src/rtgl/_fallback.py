"""Pure numpy implementations of the compiled kernels.

Same signatures and the same per-cell summation order as ``_kernels``; work is
split across a shared thread pool (numpy releases the GIL in the vector ops).
"""
from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_pool: ThreadPoolExecutor | None = None
_pool_size = 0
_pool_lock = threading.Lock()


def _get_pool(nt: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    with _pool_lock:
        if _pool is None or _pool_size < nt:
            if _pool is not None:
                _pool.shutdown(wait=True)
            _pool = ThreadPoolExecutor(max_workers=nt, thread_name_prefix="rtgl-mm")
            _pool_size = nt
        return _pool


def _run_blocks(fn, n: int, nt: int) -> None:
    blk = -(-n // nt)
    bounds = [(b * blk, min(b * blk + blk, n)) for b in range(nt)]
    if nt == 1:
        fn(*bounds[0])
        return
    futures = [_get_pool(nt).submit(fn, lo, hi) for lo, hi in bounds]
    for fut in futures:
        fut.result()


def mm_inner(X, Y, Z, colbuf, nt):
    kd, m = Y.shape

    def work(lo, hi):
        if lo >= hi:
            return
        xs = X[lo:hi]
        for j in range(m):
            col = Y[:, j].copy()
            acc = np.zeros(hi - lo)
            for k in range(kd):
                acc += xs[:, k] * col[k]
            Z[lo:hi, j] = acc

    _run_blocks(work, X.shape[0], nt)


def mm_rowwise(X, Y, Z, nt):
    kd = X.shape[1]

    def work(lo, hi):
        if lo >= hi:
            return
        zs = Z[lo:hi]
        for k in range(kd):
            zs += X[lo:hi, k, None] * Y[k]

    _run_blocks(work, X.shape[0], nt)


def mm_colwise(Xt, Y, Z, colbuf, nt):
    kd = Xt.shape[0]

    def work(lo, hi):
        if lo >= hi:
            return
        zs = np.zeros((Xt.shape[1], hi - lo))
        for k in range(kd):
            zs += Xt[k, :, None] * Y[k, lo:hi]
        Z[:, lo:hi] = zs

    _run_blocks(work, Y.shape[1], nt)


def mm_outer(X, Y, Z, partial, nt):
    kd = X.shape[1]
    lanes = partial.shape[0]
    kblk = -(-kd // lanes)

    def lane_work(lo, hi):
        for b in range(lo, hi):
            acc = partial[b]
            for k in range(b * kblk, min(b * kblk + kblk, kd)):
                acc += np.multiply.outer(X[:, k], Y[k])

    _run_blocks(lane_work, lanes, min(nt, lanes))
    acc = partial[0].copy()
    for b in range(1, lanes):
        acc += partial[b]
    Z[...] = acc


def mm_outer_atomic(X, Y, Z, nt):
    kd = X.shape[1]
    lock = threading.Lock()

    def work(lo, hi):
        for k in range(lo, hi):
            contrib = np.multiply.outer(X[:, k], Y[k])
            with lock:
                Z[...] += contrib

    _run_blocks(work, kd, nt)


def _softplus(x: float) -> float:
    return math.log1p(math.exp(min(max(x, -30.0), 30.0)))


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-min(max(x, -30.0), 30.0)))


def sgns_train(win, wout, centers, contexts, negs, lrs, workers=1):
    total = 0.0
    for p in range(centers.shape[0]):
        c = centers[p]
        o = contexts[p]
        u = win[c]
        neu = np.zeros(win.shape[1])
        targets = [(o, 1.0)] + [(t, 0.0) for t in negs[p] if t != o]
        for t, label in targets:
            v = wout[t]
            f = float(np.dot(u, v))
            total += _softplus(-f) if label else _softplus(f)
            g = (label - _sigmoid(f)) * lrs[p]
            neu += g * v
            wout[t] = v + g * u
        win[c] = u + neu
    return total
