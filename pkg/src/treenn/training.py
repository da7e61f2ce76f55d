"""Objective, exact gradients, a finite-difference oracle, AdaGrad, training loop.

Gradients are derived by hand and propagated through the tree structure:
each labeled node contributes a cross-entropy term, and the output/memory
gradients flow from parents into children. The finite-difference oracle
exists to check every one of those derivations numerically.

The objective over a mini-batch B is

    J = -(1/|B|) sum_{s in B} sum_{labeled p in s} log Pr(c_p | p)
        + (lambda/2) ||theta||^2

where theta covers composition weights, softmax weights, and the embedding
table when it is trainable. The full regularizer is applied at every step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, fields as dataclass_fields
from typing import Callable

import numpy as np

from .embeddings import EmbeddingTable, Vocabulary
from .evaluation import evaluate
from .model import (
    LSTM_CHILD_FAMILIES,
    LSTM_MEMORY_NAMES,
    MODEL_LSTM,
    MODEL_RNN,
    LstmParams,
    ModelParams,
    RnnParams,
    SoftmaxParams,
    StateTree,
    forward,
    iter_states,
)
from .tensor import ACTIVATIONS, activation_derivative, apply_activation
from .treebank import TASK_BINARY, TASK_FINE, Dataset, Tree, num_classes

GradientSet = dict[str, np.ndarray]


@dataclass
class TrainConfig:
    d: int = 50
    activation: str = "tanh"
    learning_rate: float = 0.05
    lam: float = 1e-3
    batch_size: int = 5
    epochs: int = 20
    seed: int = 0
    task: str = TASK_FINE
    model_kind: str = MODEL_LSTM
    embeddings_trainable: bool = True

    def validate(self) -> None:
        if self.d < 1:
            raise ValueError(f"d must be positive, got {self.d}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.task not in (TASK_FINE, TASK_BINARY):
            raise ValueError(f"unknown task {self.task!r}")
        if self.model_kind not in (MODEL_RNN, MODEL_LSTM):
            raise ValueError(f"unknown model kind {self.model_kind!r}")


@dataclass
class AdaGradState:
    accum: GradientSet
    eps: float = 1e-8
    # workspace reused across steps; avoids reallocating embedding-sized
    # temporaries every batch
    scratch: GradientSet | None = None


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float
    wall_seconds: float


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch_index: int, loss: float):
        super().__init__(
            f"non-finite loss {loss} at epoch {epoch}, batch {batch_index}"
        )
        self.epoch = epoch
        self.batch_index = batch_index


def init_params(
    config: TrainConfig,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    lowercase_fallback: bool = True,
) -> ModelParams:
    """Fresh parameters: weights uniform in [-1/sqrt(n), 1/sqrt(n)] with n the
    input (column) dimension, biases zero. Deterministic per config.seed.

    The embedding table is copied so training never mutates the caller's
    vectors; its trainable flag comes from the config.
    """
    config.validate()
    d, d_w = config.d, embeddings.dim
    n_cls = num_classes(config.task)
    rng = np.random.default_rng(config.seed)

    def mat(rows: int, cols: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    if config.model_kind == MODEL_RNN:
        comp: RnnParams | LstmParams = RnnParams(
            W1_leaf=mat(d, d_w),
            W2_leaf=mat(d, d_w),
            W1_inner=mat(d, d),
            W2_inner=mat(d, d),
            b=np.zeros(d),
            activation=config.activation,
        )
    else:
        kwargs: dict[str, np.ndarray] = {}
        for fam in LSTM_CHILD_FAMILIES:
            kwargs[f"W_{fam}_leaf"] = mat(d, d_w)
        for fam in LSTM_CHILD_FAMILIES:
            kwargs[f"W_{fam}_inner"] = mat(d, d)
        for name in LSTM_MEMORY_NAMES:
            kwargs[name] = mat(d, d)
        for name in ("b_i", "b_f", "b_c", "b_o"):
            kwargs[name] = np.zeros(d)
        comp = LstmParams(activation=config.activation, **kwargs)

    sm = SoftmaxParams(
        W_leaf=mat(n_cls, d_w),
        b_leaf=np.zeros(n_cls),
        W_inner=mat(n_cls, d),
        b_inner=np.zeros(n_cls),
    )
    table = EmbeddingTable(
        dim=embeddings.dim,
        vectors=embeddings.vectors.copy(),
        trainable=config.embeddings_trainable,
    )
    return ModelParams(
        kind=config.model_kind,
        composition=comp,
        softmax=sm,
        vocab=vocab,
        embeddings=table,
        d=d,
        d_w=d_w,
        n_classes=n_cls,
        lowercase_fallback=lowercase_fallback,
    )


def _regularizer(params: ModelParams, lam: float):
    if lam == 0:
        return 0.0
    total = 0.0
    for _, arr in params.tensor_items():
        total = total + np.sum(arr * arr)
    return 0.5 * lam * total


def _cross_entropy(annotated: StateTree):
    loss = 0.0
    for node in iter_states(annotated):
        if node.tree.label is not None:
            loss = loss - np.log(node.state.class_distribution[node.tree.label])
    return loss


def _objective_raw(batch: list[Tree], params: ModelParams, lam: float):
    # Accumulates in the parameter dtype, so the finite-difference oracle
    # can run the whole evaluation in extended precision.
    if not batch:
        raise ValueError("batch must be non-empty")
    loss = 0.0
    for tree in batch:
        loss = loss + _cross_entropy(forward(tree, params))
    return loss / len(batch) + _regularizer(params, lam)


def objective(batch: list[Tree], params: ModelParams, lam: float) -> float:
    return float(_objective_raw(batch, params, lam))


def zero_gradients(params: ModelParams) -> GradientSet:
    return {name: np.zeros_like(arr) for name, arr in params.tensor_items()}


def _node_backward(
    node: StateTree,
    dh: np.ndarray,
    dc: np.ndarray | None,
    params: ModelParams,
    grads: GradientSet,
    scale: float,
) -> None:
    s = node.state
    comp = params.composition

    if node.tree.label is not None:
        # d/dlogits of -log softmax = P - onehot(label). Every downstream
        # contribution is linear in this seed, so the 1/|batch| factor is
        # folded in here instead of a final pass over all buffers.
        dlogits = s.class_distribution.copy()
        dlogits[node.tree.label] -= 1.0
        dlogits *= scale
        if s.is_leaf:
            grads["softmax_W_leaf"] += np.outer(dlogits, s.h)
            grads["softmax_b_leaf"] += dlogits
            dh = dh + params.softmax.W_leaf.T @ dlogits
        else:
            grads["softmax_W_inner"] += np.outer(dlogits, s.h)
            grads["softmax_b_inner"] += dlogits
            dh = dh + params.softmax.W_inner.T @ dlogits

    if s.is_leaf:
        if params.embeddings.trainable:
            grads["embedding"][s.embedding_row] += dh
        return

    x, y = node.left.state, node.right.state
    act = comp.activation

    if params.kind == MODEL_RNN:
        da = dh * activation_derivative(act, s.a)
        w1n = f"W1_{'leaf' if x.is_leaf else 'inner'}"
        w2n = f"W2_{'leaf' if y.is_leaf else 'inner'}"
        grads[w1n] += np.outer(da, x.h)
        grads[w2n] += np.outer(da, y.h)
        grads["b"] += da
        dx = getattr(comp, w1n).T @ da
        dy = getattr(comp, w2n).T @ da
        _node_backward(node.left, dx, None, params, grads, scale)
        _node_backward(node.right, dy, None, params, grads, scale)
        return

    def wn(family: str, is_leaf: bool) -> str:
        return f"W_{family}_{'leaf' if is_leaf else 'inner'}"

    c_p = s.c
    g_c = apply_activation(act, c_p)
    da_o = (dh * g_c) * s.o * (1.0 - s.o)
    dcp = dh * s.o * activation_derivative(act, c_p) + comp.W_co.T @ da_o
    if dc is not None:
        dcp = dcp + dc

    du = dcp * activation_derivative(act, s.u)
    dcand1 = du * s.i1
    dcand2 = du * s.i2
    da_i1 = (du * s.cand1) * s.i1 * (1.0 - s.i1)
    da_i2 = (du * s.cand2) * s.i2 * (1.0 - s.i2)
    da_f1 = (dcp * x.c) * s.f1 * (1.0 - s.f1)
    da_f2 = (dcp * y.c) * s.f2 * (1.0 - s.f2)

    grads[wn("o1", x.is_leaf)] += np.outer(da_o, x.h)
    grads[wn("o2", y.is_leaf)] += np.outer(da_o, y.h)
    grads["W_co"] += np.outer(da_o, c_p)
    grads["b_o"] += da_o

    grads[wn("c1", x.is_leaf)] += np.outer(dcand1, x.h)
    grads[wn("c2", y.is_leaf)] += np.outer(dcand2, y.h)
    grads["b_c"] += du

    # a_i1 reads (x via W_i1, y via W_i2); a_i2 the swap; likewise forgets.
    grads[wn("i1", x.is_leaf)] += np.outer(da_i1, x.h)
    grads[wn("i2", y.is_leaf)] += np.outer(da_i1, y.h)
    grads[wn("i1", y.is_leaf)] += np.outer(da_i2, y.h)
    grads[wn("i2", x.is_leaf)] += np.outer(da_i2, x.h)
    grads["b_i"] += da_i1 + da_i2

    grads[wn("f1", x.is_leaf)] += np.outer(da_f1, x.h)
    grads[wn("f2", y.is_leaf)] += np.outer(da_f1, y.h)
    grads[wn("f1", y.is_leaf)] += np.outer(da_f2, y.h)
    grads[wn("f2", x.is_leaf)] += np.outer(da_f2, x.h)
    grads["b_f"] += da_f1 + da_f2

    # Memory-matrix products are skipped for leaf children in the forward
    # pass (leaf memory is zero), so only inner children contribute here.
    if not x.is_leaf:
        grads["W_ci1"] += np.outer(da_i1, x.c)
        grads["W_ci2"] += np.outer(da_i2, x.c)
        grads["W_cf1"] += np.outer(da_f1, x.c)
        grads["W_cf2"] += np.outer(da_f2, x.c)
    if not y.is_leaf:
        grads["W_ci2"] += np.outer(da_i1, y.c)
        grads["W_ci1"] += np.outer(da_i2, y.c)
        grads["W_cf2"] += np.outer(da_f1, y.c)
        grads["W_cf1"] += np.outer(da_f2, y.c)

    dx = (
        getattr(comp, wn("i1", x.is_leaf)).T @ da_i1
        + getattr(comp, wn("i2", x.is_leaf)).T @ da_i2
        + getattr(comp, wn("f1", x.is_leaf)).T @ da_f1
        + getattr(comp, wn("f2", x.is_leaf)).T @ da_f2
        + getattr(comp, wn("c1", x.is_leaf)).T @ dcand1
        + getattr(comp, wn("o1", x.is_leaf)).T @ da_o
    )
    dy = (
        getattr(comp, wn("i2", y.is_leaf)).T @ da_i1
        + getattr(comp, wn("i1", y.is_leaf)).T @ da_i2
        + getattr(comp, wn("f2", y.is_leaf)).T @ da_f1
        + getattr(comp, wn("f1", y.is_leaf)).T @ da_f2
        + getattr(comp, wn("c2", y.is_leaf)).T @ dcand2
        + getattr(comp, wn("o2", y.is_leaf)).T @ da_o
    )

    dcx = dcy = None
    if not x.is_leaf:
        dcx = (
            dcp * s.f1
            + comp.W_ci1.T @ da_i1
            + comp.W_ci2.T @ da_i2
            + comp.W_cf1.T @ da_f1
            + comp.W_cf2.T @ da_f2
        )
    if not y.is_leaf:
        dcy = (
            dcp * s.f2
            + comp.W_ci2.T @ da_i1
            + comp.W_ci1.T @ da_i2
            + comp.W_cf2.T @ da_f1
            + comp.W_cf1.T @ da_f2
        )

    _node_backward(node.left, dx, dcx, params, grads, scale)
    _node_backward(node.right, dy, dcy, params, grads, scale)


def backward(
    batch: list[Tree], params: ModelParams, lam: float
) -> tuple[float, GradientSet]:
    """Objective value and its exact gradient for one mini-batch.

    Sentence gradients are summed in batch order and scaled by 1/|batch|;
    the lambda*theta regularization gradient is then added unscaled.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    grads = zero_gradients(params)
    loss = 0.0
    zero = np.zeros(params.d)
    inv = 1.0 / len(batch)
    for tree in batch:
        annotated = forward(tree, params)
        loss = loss + _cross_entropy(annotated)
        _node_backward(annotated, zero, None, params, grads, inv)
    loss = loss * inv
    if lam:
        for name, arr in params.tensor_items():
            grads[name] += lam * arr
        loss = loss + _regularizer(params, lam)
    return float(loss), grads


def central_difference(f: Callable[[float], float], x: float, h: float) -> float:
    """(f(x+h) - f(x-h)) / 2h, the rule the gradient oracle applies per entry."""
    if not h > 0:
        raise ValueError("h must be positive")
    return (f(x + h) - f(x - h)) / (2.0 * h)


def _extended_precision_copy(params: ModelParams) -> ModelParams:
    clone = params.copy()
    comp = clone.composition
    for f in dataclass_fields(comp):
        value = getattr(comp, f.name)
        if isinstance(value, np.ndarray):
            setattr(comp, f.name, value.astype(np.longdouble))
    sm = clone.softmax
    for f in dataclass_fields(sm):
        setattr(sm, f.name, getattr(sm, f.name).astype(np.longdouble))
    clone.embeddings.vectors = clone.embeddings.vectors.astype(np.longdouble)
    return clone


def finite_difference_gradient(
    batch: list[Tree], params: ModelParams, lam: float, h: float = 1e-5
) -> GradientSet:
    """Central-difference gradient of the objective, entry by entry.

    Evaluations run in extended precision (np.longdouble): with float64
    the two objective values agree to ~15 digits and their difference is
    mostly cancellation noise for small gradient entries, which would make
    the oracle itself the least accurate part of the comparison. Costs two
    evaluations per scalar parameter; only usable on tiny configurations,
    which is exactly its job.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    hp = _extended_precision_copy(params)
    step = np.longdouble(h)
    grads: GradientSet = {}
    for name, arr in hp.tensor_items():
        out = np.zeros(arr.shape, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = out.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            jp = _objective_raw(batch, hp, lam)
            flat[idx] = orig - step
            jm = _objective_raw(batch, hp, lam)
            flat[idx] = orig
            gflat[idx] = float((jp - jm) / (2.0 * step))
        grads[name] = out
    return grads


def gradient_check(
    batch: list[Tree], params: ModelParams, lam: float = 0.0, h: float = 1e-5
) -> dict[str, float]:
    """Worst relative error |a - n| / max(|a|, |n|, 1e-8) per tensor."""
    _, analytic = backward(batch, params, lam)
    numeric = finite_difference_gradient(batch, params, lam, h)
    worst: dict[str, float] = {}
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        errs = np.abs(a - n) / denom
        worst[name] = float(errs.max()) if errs.size else 0.0
    return worst


def init_adagrad(params: ModelParams, eps: float = 1e-8) -> AdaGradState:
    return AdaGradState(accum=zero_gradients(params), eps=eps)


def adagrad_step(
    params: ModelParams, grads: GradientSet, state: AdaGradState, lr: float
) -> None:
    """In-place update: accum += g^2; p -= lr * g / (sqrt(accum) + eps)."""
    if state.scratch is None:
        state.scratch = zero_gradients(params)
    for name, arr in params.tensor_items():
        g = grads[name]
        a = state.accum[name]
        tmp = state.scratch[name]
        np.multiply(g, g, out=tmp)
        a += tmp
        np.sqrt(a, out=tmp)
        tmp += state.eps
        np.divide(g, tmp, out=tmp)
        tmp *= lr
        arr -= tmp


def train(
    config: TrainConfig,
    dataset: Dataset,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    log: Callable[[EpochRecord], None] | None = None,
    lowercase_fallback: bool = True,
) -> tuple[ModelParams, list[EpochRecord]]:
    """Mini-batch AdaGrad training with dev-set model selection.

    Each epoch shuffles the training trees (seeded), walks them in batches
    of config.batch_size (final remainder batch included), and applies one
    AdaGrad step per batch. The returned parameters are the snapshot with
    the highest dev root accuracy; ties go to the earliest epoch.
    """
    config.validate()
    if dataset.task != config.task:
        raise ValueError(
            f"dataset task {dataset.task!r} does not match config task {config.task!r}"
        )
    params = init_params(config, vocab, embeddings, lowercase_fallback)
    if config.epochs == 0:
        return params, []
    state = init_adagrad(params)
    # Shuffle stream kept separate from the init stream so neither ever
    # aliases another run's (seed + k) init draws.
    shuffle_rng = np.random.default_rng([config.seed, 1])
    order = np.arange(len(dataset.train))

    best = params.copy()
    best_acc = -1.0
    history: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        shuffle_rng.shuffle(order)
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [dataset.train[i] for i in order[start : start + config.batch_size]]
            loss, grads = backward(batch, params, config.lam)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, n_batches, loss)
            adagrad_step(params, grads, state, config.learning_rate)
            total_loss += loss
            n_batches += 1
        report = evaluate(params, dataset.dev)
        record = EpochRecord(
            epoch=epoch,
            train_loss=total_loss / n_batches,
            dev_accuracy=report.root_accuracy,
            wall_seconds=time.perf_counter() - t0,
        )
        history.append(record)
        if log is not None:
            log(record)
        if record.dev_accuracy > best_acc:
            best_acc = record.dev_accuracy
            best = params.copy()
    return best, history


HISTORY_CSV_HEADER = "epoch,train_loss,dev_accuracy"


def history_csv(history: list[EpochRecord]) -> str:
    """History as CSV text. Deliberately excludes wall-clock so identical
    (seed, config, data) runs serialize byte-identically; timing lives in
    the run manifest instead."""
    lines = [HISTORY_CSV_HEADER]
    for rec in history:
        lines.append(f"{rec.epoch},{rec.train_loss!r},{rec.dev_accuracy!r}")
    return "\n".join(lines) + "\n"
