"""Feed-forward network trained with explicit forward/backward matmul kernels.

Every matrix product goes through :mod:`rtgl.mm` under a kernel label, so the
strategy for each kernel can be chosen independently and each call timed.
Kernel labels: ``Y{i}`` and ``R1`` forward; ``Mr_2``, ``M{i}_1`` and
``M{i}_2`` backward, where ``_1`` is the propagated error and ``_2`` the
weight gradient of a layer.
"""
from __future__ import annotations

import enum
import time
from pathlib import Path
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .mm import KernelTiming, Strategy, matmul_timed, transpose

PROB_CLAMP = 1e-12


class Task(enum.Enum):
    LINK = "link"
    NODE = "node"


class ContractError(ValueError):
    pass


@dataclass
class FnnModel:
    weights: list[np.ndarray]  # W_1..W_n, then W_r last
    lr: float

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    @property
    def task(self) -> Task:
        return Task.LINK if self.weights[-1].shape[1] == 1 else Task.NODE

    def copy(self) -> "FnnModel":
        return FnnModel([w.copy() for w in self.weights], self.lr)


@dataclass
class ForwardTrace:
    X: np.ndarray
    pre: list[np.ndarray]  # hidden pre-activations
    Y: list[np.ndarray]  # hidden activations Y_1..Y_n
    R1: np.ndarray
    R2: np.ndarray


@dataclass
class GradientSet:
    errors: list[np.ndarray]  # M_i^(1) for hidden layers 1..n, then M_r^(1)
    weights: list[np.ndarray]  # M_i^(2), aligned with FnnModel.weights


@dataclass
class LabeledBatch:
    X: np.ndarray
    targets: np.ndarray
    pairs: list | None = field(default=None, repr=False)  # node pairs behind link rows

    def __post_init__(self):
        if self.X.shape[0] != self.targets.shape[0]:
            raise ContractError(f"{self.X.shape[0]} inputs but {self.targets.shape[0]} target rows")

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, idx) -> "LabeledBatch":
        pairs = None if self.pairs is None else [self.pairs[i] for i in np.asarray(idx)]
        return LabeledBatch(self.X[idx], self.targets[idx], pairs)


@dataclass
class KernelRecorder:
    """Collects per-kernel timings and the "others" (non-matmul) time."""

    timings: list[KernelTiming] = field(default_factory=list)
    other_nanos: int = 0


def init_model(sizes: Sequence[int], lr: float = 0.01, seed: int = 0) -> FnnModel:
    """Glorot-uniform weights for layer sizes ``[D_in, H_1, ..., H_n, L]``."""
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"invalid layer sizes {list(sizes)}")
    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
    return FnnModel(weights, lr)


def _mm(X, Y, label, strategies, threads, rec):
    if isinstance(strategies, Strategy):
        s = strategies
    else:
        s = strategies.get(label, Strategy.ROW_WISE) if strategies else Strategy.ROW_WISE
    Z, timing = matmul_timed(X, Y, s, threads, label)
    if rec is not None:
        rec.timings.append(timing)
    return Z


def _softmax(r: np.ndarray) -> np.ndarray:
    e = np.exp(r - r.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(r: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(r, -500.0, 500.0)))


def forward(model: FnnModel, X, strategies: Mapping[str, Strategy] | None = None,
            threads: int | None = None, recorder: KernelRecorder | None = None) -> ForwardTrace:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights[0].shape[0]:
        raise ContractError(f"input of shape {X.shape} does not fit W_1 {model.weights[0].shape}")
    pre, acts = [], []
    h = X
    for i, W in enumerate(model.weights[:-1], start=1):
        z = _mm(h, W, f"Y{i}", strategies, threads, recorder)
        t0 = time.perf_counter_ns()
        h = np.maximum(z, 0.0)
        if recorder:
            recorder.other_nanos += time.perf_counter_ns() - t0
        pre.append(z)
        acts.append(h)
    R1 = _mm(h, model.weights[-1], "R1", strategies, threads, recorder)
    t0 = time.perf_counter_ns()
    R2 = _sigmoid(R1) if R1.shape[1] == 1 else _softmax(R1)
    if recorder:
        recorder.other_nanos += time.perf_counter_ns() - t0
    return ForwardTrace(X, pre, acts, R1, R2)


def _check_targets(targets: np.ndarray, R2: np.ndarray) -> None:
    if targets.shape != R2.shape:
        raise ContractError(f"targets {targets.shape} do not match outputs {R2.shape}")
    if not np.isin(targets, (0.0, 1.0)).all():
        raise ContractError("targets must be 0/1")
    if R2.shape[1] > 1 and not np.all(targets.sum(axis=1) == 1.0):
        raise ContractError("classification targets must be one-hot rows")


def loss(trace: ForwardTrace, targets, task: Task | None = None) -> float:
    """Mean binary (L=1) or categorical (L>1) cross-entropy over the batch."""
    targets = np.asarray(targets, dtype=np.float64)
    _check_targets(targets, trace.R2)
    p = np.clip(trace.R2, PROB_CLAMP, 1.0 - PROB_CLAMP)
    task = task or (Task.LINK if p.shape[1] == 1 else Task.NODE)
    if task is Task.LINK:
        per_row = -(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)).sum(axis=1)
    else:
        per_row = -(targets * np.log(p)).sum(axis=1)
    return float(per_row.mean())


def backward(model: FnnModel, trace: ForwardTrace, targets,
             strategies: Mapping[str, Strategy] | None = None, threads: int | None = None,
             recorder: KernelRecorder | None = None) -> GradientSet:
    targets = np.asarray(targets, dtype=np.float64)
    if len(trace.Y) != model.n_hidden or trace.R2.shape[1] != model.weights[-1].shape[1] or \
            any(y.shape[1] != w.shape[1] for y, w in zip(trace.Y, model.weights)):
        raise ContractError("trace does not match the model (stale trace?)")
    if targets.shape != trace.R2.shape:
        raise ContractError(f"targets {targets.shape} do not match outputs {trace.R2.shape}")
    B = trace.X.shape[0]
    n = model.n_hidden

    t0 = time.perf_counter_ns()
    err = (trace.R2 - targets) / B  # M_r^(1), element-wise
    if recorder:
        recorder.other_nanos += time.perf_counter_ns() - t0
    inputs = [trace.X] + trace.Y
    grads: list[np.ndarray] = [None] * (n + 1)  # type: ignore[list-item]
    errors: list[np.ndarray] = [None] * (n + 1)  # type: ignore[list-item]
    errors[n] = err
    grads[n] = _mm(transpose(inputs[n]), err, "Mr_2", strategies, threads, recorder)
    for i in range(n, 0, -1):
        upper = model.weights[i]
        prop = _mm(err, transpose(upper), f"M{i}_1", strategies, threads, recorder)
        t0 = time.perf_counter_ns()
        err = prop * (trace.pre[i - 1] > 0.0)
        if recorder:
            recorder.other_nanos += time.perf_counter_ns() - t0
        errors[i - 1] = err
        grads[i - 1] = _mm(transpose(inputs[i - 1]), err, f"M{i}_2", strategies, threads, recorder)
    return GradientSet(errors, grads)


def sgd_step(model: FnnModel, grads: GradientSet) -> FnnModel:
    for W, G in zip(model.weights, grads.weights):
        if W.shape != G.shape:
            raise ContractError(f"gradient {G.shape} does not match weight {W.shape}")
        W -= model.lr * G
    return model


def train_batch_online(model: FnnModel, batch: LabeledBatch, iterations: int = 10,
                       strategies: Mapping[str, Strategy] | None = None, threads: int | None = None,
                       recorder: KernelRecorder | None = None) -> list[float]:
    """Repeat forward/loss/backward/step on the same batch; returns per-iteration loss."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    losses = []
    for _ in range(iterations):
        trace = forward(model, batch.X, strategies, threads, recorder)
        losses.append(loss(trace, batch.targets))
        grads = backward(model, trace, batch.targets, strategies, threads, recorder)
        sgd_step(model, grads)
    return losses


def predict(model: FnnModel, X, strategies=None, threads=None) -> np.ndarray:
    return forward(model, X, strategies, threads).R2


def kernel_shapes(sizes: Sequence[int], batch: int) -> list[tuple[str, tuple[int, int], tuple[int, int]]]:
    """(label, shape of first operand, shape of second operand) for one training iteration."""
    n = len(sizes) - 2
    shapes = []
    for i in range(1, n + 1):
        shapes.append((f"Y{i}", (batch, sizes[i - 1]), (sizes[i - 1], sizes[i])))
    shapes.append(("R1", (batch, sizes[n]), (sizes[n], sizes[-1])))
    shapes.append(("Mr_2", (sizes[n], batch), (batch, sizes[-1])))
    upper = sizes[-1]
    for i in range(n, 0, -1):
        shapes.append((f"M{i}_1", (batch, upper), (upper, sizes[i])))
        shapes.append((f"M{i}_2", (sizes[i - 1], batch), (batch, sizes[i])))
        upper = sizes[i]
    return shapes


def dump_model(model: FnnModel, path: str | Path) -> None:
    """Plain text: ``lr`` line, then per matrix a ``rows cols`` line followed by its rows."""
    with open(path, "w") as fh:
        fh.write(f"lr {model.lr!r}\n")
        for W in model.weights:
            fh.write(f"{W.shape[0]} {W.shape[1]}\n")
            for row in W:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_model(path: str | Path) -> FnnModel:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or lines[0][0] != "lr":
        raise ContractError(f"{path}: not a model dump")
    lr = float(lines[0][1])
    weights, i = [], 1
    while i < len(lines):
        rows, cols = int(lines[i][0]), int(lines[i][1])
        W = np.array(lines[i + 1: i + 1 + rows], dtype=np.float64).reshape(rows, cols)
        weights.append(W)
        i += 1 + rows
    return FnnModel(weights, lr)


LINK_SIZES = (16, 128, 1)
NODE_SIZES = (64, 256, 128, 10)
