# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: the four parallel matmul dataflows and the SGNS update loop.

All matmul entry points write into a caller-allocated, zero-filled ``Z`` and
accumulate every output cell over ``k`` in ascending order starting from 0.0,
so Inner/RowWise/ColumnWise are bit-identical to a sequential triple loop.
"""
from cython.parallel cimport prange
from libc.math cimport exp, log1p
from libc.stdlib cimport malloc, free
from libc.string cimport memset
from libc.stdint cimport int64_t
cimport openmp

cdef extern from "_atomic.h" nogil:
    void rtgl_atomic_add(double *target, double value)


cdef inline Py_ssize_t _imin(Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    return a if a < b else b


def mm_inner(const double[:, ::1] X, const double[:, ::1] Y, double[:, ::1] Z,
             double[:, ::1] colbuf, int nt):
    # colbuf: (nt, K) per-thread copy of the current column of Y
    cdef Py_ssize_t n = X.shape[0], kd = X.shape[1], m = Y.shape[1]
    cdef Py_ssize_t blk = (n + nt - 1) // nt
    cdef Py_ssize_t b, i, j, k, lo, hi
    cdef double acc
    cdef double *col
    with nogil:
        for b in prange(nt, num_threads=nt, schedule='static', chunksize=1):
            lo = b * blk
            hi = _imin(lo + blk, n)
            col = &colbuf[b, 0]
            for j in range(m):
                for k in range(kd):
                    col[k] = Y[k, j]
                for i in range(lo, hi):
                    acc = 0.0
                    for k in range(kd):
                        acc = acc + X[i, k] * col[k]
                    Z[i, j] = acc


def mm_rowwise(const double[:, ::1] X, const double[:, ::1] Y, double[:, ::1] Z, int nt):
    cdef Py_ssize_t n = X.shape[0], kd = X.shape[1], m = Y.shape[1]
    cdef Py_ssize_t blk = (n + nt - 1) // nt
    cdef Py_ssize_t b, i, j, k, lo, hi
    cdef double x
    with nogil:
        for b in prange(nt, num_threads=nt, schedule='static', chunksize=1):
            lo = b * blk
            hi = _imin(lo + blk, n)
            for i in range(lo, hi):
                for k in range(kd):
                    x = X[i, k]
                    for j in range(m):
                        Z[i, j] = Z[i, j] + x * Y[k, j]


def mm_colwise(const double[:, ::1] Xt, const double[:, ::1] Y, double[:, ::1] Z,
               double[:, ::1] colbuf, int nt):
    # Xt: X transposed (K, n) so that columns of X are contiguous; colbuf: (nt, n)
    cdef Py_ssize_t kd = Xt.shape[0], n = Xt.shape[1], m = Y.shape[1]
    cdef Py_ssize_t blk = (m + nt - 1) // nt
    cdef Py_ssize_t b, i, j, k, lo, hi
    cdef double y
    cdef double *zc
    with nogil:
        for b in prange(nt, num_threads=nt, schedule='static', chunksize=1):
            lo = b * blk
            hi = _imin(lo + blk, m)
            zc = &colbuf[b, 0]
            for j in range(lo, hi):
                memset(zc, 0, n * sizeof(double))
                for k in range(kd):
                    y = Y[k, j]
                    for i in range(n):
                        zc[i] = zc[i] + Xt[k, i] * y
                for i in range(n):
                    Z[i, j] = zc[i]


def mm_outer(const double[:, ::1] X, const double[:, ::1] Y, double[:, ::1] Z,
             double[:, :, ::1] partial, int nt):
    # partial: (lanes, n, m) zero-filled; lane boundaries depend on lanes only,
    # never on nt, so the result is the same for every thread count.
    cdef Py_ssize_t n = X.shape[0], kd = X.shape[1], m = Y.shape[1]
    cdef Py_ssize_t lanes = partial.shape[0]
    cdef Py_ssize_t kblk = (kd + lanes - 1) // lanes
    cdef Py_ssize_t rblk = (n + nt - 1) // nt
    cdef Py_ssize_t b, c, i, j, k, lo, hi
    cdef double x, acc
    with nogil:
        for b in prange(lanes, num_threads=nt, schedule='static'):
            lo = b * kblk
            hi = _imin(lo + kblk, kd)
            for k in range(lo, hi):
                for i in range(n):
                    x = X[i, k]
                    for j in range(m):
                        partial[b, i, j] = partial[b, i, j] + x * Y[k, j]
        for c in prange(nt, num_threads=nt, schedule='static', chunksize=1):
            lo = c * rblk
            hi = _imin(lo + rblk, n)
            for i in range(lo, hi):
                for j in range(m):
                    acc = partial[0, i, j]
                    for b in range(1, lanes):
                        acc = acc + partial[b, i, j]
                    Z[i, j] = acc


def mm_outer_atomic(const double[:, ::1] X, const double[:, ::1] Y, double[:, ::1] Z, int nt):
    cdef Py_ssize_t n = X.shape[0], kd = X.shape[1], m = Y.shape[1]
    cdef Py_ssize_t blk = (kd + nt - 1) // nt
    cdef Py_ssize_t b, i, j, k, lo, hi
    cdef double x
    with nogil:
        for b in prange(nt, num_threads=nt, schedule='static', chunksize=1):
            lo = b * blk
            hi = _imin(lo + blk, kd)
            for k in range(lo, hi):
                for i in range(n):
                    x = X[i, k]
                    for j in range(m):
                        rtgl_atomic_add(&Z[i, j], x * Y[k, j])


cdef inline double _softplus_clamped(double x) noexcept nogil:
    # -log(sigmoid(-x)) with x clamped to [-30, 30]
    if x > 30.0:
        x = 30.0
    elif x < -30.0:
        x = -30.0
    return log1p(exp(x))


cdef inline double _sigmoid_clamped(double x) noexcept nogil:
    if x > 30.0:
        x = 30.0
    elif x < -30.0:
        x = -30.0
    return 1.0 / (1.0 + exp(-x))


cdef double _sgns_pair(double[:, ::1] win, double[:, ::1] wout, Py_ssize_t c,
                       Py_ssize_t o, const int64_t[:, ::1] negs, Py_ssize_t p,
                       double lr, double *neu) noexcept nogil:
    cdef Py_ssize_t d = win.shape[1], nk = negs.shape[1]
    cdef Py_ssize_t q, t, a
    cdef double f, s, g, label, loss = 0.0
    memset(neu, 0, d * sizeof(double))
    for q in range(nk + 1):
        if q == 0:
            t = o
            label = 1.0
        else:
            t = negs[p, q - 1]
            if t == o:
                continue
            label = 0.0
        f = 0.0
        for a in range(d):
            f = f + win[c, a] * wout[t, a]
        s = _sigmoid_clamped(f)
        if q == 0:
            loss = loss + _softplus_clamped(-f)
        else:
            loss = loss + _softplus_clamped(f)
        g = (label - s) * lr
        for a in range(d):
            neu[a] = neu[a] + g * wout[t, a]
        for a in range(d):
            wout[t, a] = wout[t, a] + g * win[c, a]
    for a in range(d):
        win[c, a] = win[c, a] + neu[a]
    return loss


def sgns_train(double[:, ::1] win, double[:, ::1] wout, const int64_t[::1] centers,
               const int64_t[::1] contexts, const int64_t[:, ::1] negs,
               const double[::1] lrs, int workers=1):
    """Apply SGNS updates for every (center, context) pair in order.

    ``workers > 1`` shards pairs across threads without synchronisation
    (hogwild); results then depend on scheduling.
    """
    cdef Py_ssize_t npairs = centers.shape[0], d = win.shape[1]
    cdef Py_ssize_t p
    cdef double total = 0.0
    cdef double *buf = <double *> malloc(max(workers, 1) * max(d, 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            if workers <= 1:
                for p in range(npairs):
                    total = total + _sgns_pair(win, wout, centers[p], contexts[p], negs, p, lrs[p], buf)
            else:
                for p in prange(npairs, num_threads=workers, schedule='static'):
                    total += _sgns_pair(win, wout, centers[p], contexts[p], negs, p, lrs[p],
                                        buf + openmp.omp_get_thread_num() * d)
    finally:
        free(buf)
    return total
