"""
Training for SteadyRNN.

Adam with bias correction, a seeded mini-batch loop with early stopping on
the validation objective, and the λ sweep. A model kind names the cell and
whether the consistency term is on:

    lstm, gru         plain baselines, always λ = 0
    rc-gru, rc-lstm   regularized, λ from the config

With λ = 0 a regularized kind follows exactly the code path of its baseline,
so the two produce bitwise-identical logs.

Example:
    >>> from steadyrnn.train import TrainConfig, train
    >>> params, log = train("rc-gru", train_set, val_set, TrainConfig(lam=0.05, max_epochs=20))
    >>> log.best_epoch, log.stop_reason
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from steadyrnn._util import ParameterError, ShapeError, TrainingDivergedError, fmt_float
from steadyrnn.cells import CellParams, ParamGrads
from steadyrnn.data import Dataset
from steadyrnn.diagnostics import mean_drift
from steadyrnn.linalg import Rng
from steadyrnn.objective import LossBreakdown, batch_loss, evaluate_loss
from steadyrnn.runlog import RUNLOG


MODEL_KINDS = {
    "lstm": ("lstm", False),
    "gru": ("gru", False),
    "rc-lstm": ("lstm", True),
    "rc-gru": ("gru", True),
}

DEFAULT_LAMBDA_GRID = (0.01, 0.05, 0.1)

LOG_COLUMNS = (
    "epoch",
    "train_l_cls", "train_l_rc", "train_total",
    "val_l_cls", "val_l_rc", "val_total",
    "val_accuracy", "val_mean_drift",
)


def resolve_model(model_kind: str) -> tuple[str, bool]:
    """``(cell kind, regularized)`` for a model kind."""
    try:
        return MODEL_KINDS[model_kind]
    except KeyError:
        raise ParameterError("Unknown model kind '{}'. Must be one of: {}".format(
            model_kind, sorted(MODEL_KINDS))) from None


#############################################################################
#############################################################################

### CONFIGURATION

@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop hyperparameters.

    Attributes:
        learning_rate: Adam step size.
        batch_size: Sequences per mini-batch; the last batch may be short.
        lam: Consistency weight λ for regularized model kinds.
        hidden_dim: Hidden width k. 128 is the full-protocol value; 32 keeps
            CPU runs to minutes.
        max_epochs: Hard cap on epochs.
        patience: Epochs without validation improvement before stopping.
        seed: Seeds initialization and batch shuffling.
        adam_beta1, adam_beta2, adam_epsilon: Adam constants.
        grad_clip_norm: Optional global-norm clip; off by default.
    """

    learning_rate: float = 0.001
    batch_size: int = 64
    lam: float = 0.0
    hidden_dim: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    grad_clip_norm: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0, got {}".format(self.learning_rate))
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ParameterError("adam betas must be in (0, 1), got ({}, {})".format(self.adam_beta1, self.adam_beta2))
        if not self.adam_epsilon > 0:
            raise ParameterError("adam_epsilon must be > 0, got {}".format(self.adam_epsilon))
        if self.lam < 0:
            raise ParameterError("lambda must be >= 0, got {}".format(self.lam))
        if self.patience < 1:
            raise ParameterError("patience must be >= 1, got {}".format(self.patience))
        if self.batch_size < 1 or self.hidden_dim < 1 or self.max_epochs < 1:
            raise ParameterError("batch_size, hidden_dim and max_epochs must be >= 1")
        if self.grad_clip_norm is not None and not self.grad_clip_norm > 0:
            raise ParameterError("grad_clip_norm must be > 0 when set, got {}".format(self.grad_clip_norm))

    def with_lambda(self, lam: float) -> TrainConfig:
        return replace(self, lam=float(lam))

    def to_dict(self) -> dict[str, object]:
        return asdict(self)


#############################################################################
#############################################################################

### ADAM

@dataclass
class AdamState:
    """First and second moments per parameter block, and the step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: CellParams) -> AdamState:
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.arrays.items()},
            v={name: np.zeros_like(arr) for name, arr in params.arrays.items()},
        )


def adam_step(params: CellParams, grads: ParamGrads, state: AdamState,
              config: TrainConfig) -> tuple[CellParams, AdamState]:
    """
    One bias-corrected Adam update. Inputs are not modified.

        m ← β₁m + (1−β₁)g        v ← β₂v + (1−β₂)g²
        m̂ = m/(1−β₁ᵗ)            v̂ = v/(1−β₂ᵗ)
        p ← p − lr · m̂ / (√v̂ + ε)

    Raises:
        ShapeError: When grads or state are not congruent with params.
    """
    grads.check_congruent(params)
    for name, arr in params.arrays.items():
        if state.m.get(name) is None or state.m[name].shape != arr.shape or state.v[name].shape != arr.shape:
            raise ShapeError("Adam state block {} does not match parameter shape {}".format(name, arr.shape))
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.step + 1
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    new_m, new_v, new_arrays = {}, {}, {}
    for name, p in params.arrays.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        new_arrays[name] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
        new_m[name], new_v[name] = m, v
    return params.with_arrays(new_arrays), AdamState(m=new_m, v=new_v, step=t)


#############################################################################
#############################################################################

### LOGS

@dataclass(frozen=True)
class EpochRecord:
    """Losses and validation diagnostics after one epoch."""

    epoch: int
    train: LossBreakdown
    val: LossBreakdown
    val_accuracy: float
    val_mean_drift: float

    def csv_row(self) -> list[str]:
        values = [
            self.train.l_cls, self.train.l_rc, self.train.total,
            self.val.l_cls, self.val.l_rc, self.val.total,
            self.val_accuracy, self.val_mean_drift,
        ]
        return [str(self.epoch)] + [fmt_float(v) for v in values]


@dataclass
class TrainLog:
    """Per-epoch records, the best epoch and why training stopped.

    Attributes:
        model_kind: Model kind that was trained.
        lam: λ actually used (0 for baselines).
        records: One EpochRecord per epoch, contiguous from 1.
        best_epoch: Epoch with the lowest validation total loss.
        stop_reason: ``"early_stopping"`` or ``"max_epochs"``.
    """

    model_kind: str
    lam: float
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    @property
    def best_record(self) -> EpochRecord:
        return self.records[self.best_epoch - 1]

    @property
    def best_val_loss(self) -> float:
        return self.best_record.val.total

    def csv_rows(self) -> list[list[str]]:
        return [list(LOG_COLUMNS)] + [r.csv_row() for r in self.records]

    def summary_lines(self) -> list[str]:
        """``key = value`` lines for the run summary file."""
        best = self.best_record
        return [
            "model = {}".format(self.model_kind),
            "lambda = {}".format(fmt_float(self.lam)),
            "epochs = {}".format(len(self.records)),
            "best_epoch = {}".format(self.best_epoch),
            "stop_reason = {}".format(self.stop_reason),
            "best_val_total = {}".format(fmt_float(best.val.total)),
            "best_val_l_rc = {}".format(fmt_float(best.val.l_rc)),
            "best_val_accuracy = {}".format(fmt_float(best.val_accuracy)),
        ]

    def same_trajectory(self, other: TrainLog) -> bool:
        """Records, best epoch and stop reason identical (model kind ignored)."""
        return (self.records == other.records and self.best_epoch == other.best_epoch
                and self.stop_reason == other.stop_reason)


#############################################################################
#############################################################################

### TRAINING LOOP

def _check_datasets(train_data: Dataset, val_data: Dataset) -> None:
    if len(train_data) == 0 or len(val_data) == 0:
        raise ParameterError("training needs nonempty train and validation sets")
    if (train_data.input_dim, train_data.window_length) != (val_data.input_dim, val_data.window_length):
        raise ShapeError("train (d={}, T={}) and validation (d={}, T={}) disagree".format(
            train_data.input_dim, train_data.window_length, val_data.input_dim, val_data.window_length))
    if train_data.num_classes != val_data.num_classes:
        raise ShapeError("train has {} classes, validation has {}".format(train_data.num_classes, val_data.num_classes))


def _diverged(runlog, epoch, where):
    message = "non-finite {} at epoch {}".format(where, epoch)
    if runlog is not None:
        runlog.add_event("divergence", {"epoch": epoch, "where": where})
    return TrainingDivergedError(message, epoch=epoch)


def train(model_kind: str, train_data: Dataset, val_data: Dataset, config: TrainConfig,
          runlog: Optional[RUNLOG] = None) -> tuple[CellParams, TrainLog]:
    """
    Train one model with early stopping on the validation objective.

    Each epoch shuffles the training windows with a stream derived from
    ``config.seed`` and the epoch number, then steps Adam once per
    mini-batch. After every epoch the full validation set is scored with the
    model's own objective; training stops after ``patience`` epochs without
    strict improvement, or at ``max_epochs``.

    Args:
        model_kind: One of ``lstm``, ``gru``, ``rc-lstm``, ``rc-gru``.
        train_data: Normalized training windows.
        val_data: Normalized validation windows.
        config: Hyperparameters.
        runlog: Optional RUNLOG receiving one event per epoch.

    Returns:
        ``(params, log)`` with the parameters of the best validation epoch.

    Raises:
        TrainingDivergedError: When a loss or gradient becomes non-finite.
    """
    cell, regularized = resolve_model(model_kind)
    lam = config.lam if regularized else 0.0
    _check_datasets(train_data, val_data)

    root = Rng(config.seed)
    params = CellParams.init(cell, train_data.input_dim, config.hidden_dim, train_data.num_classes, root.child(0))
    state = AdamState.zeros_like(params)
    x_train, y_train = train_data.inputs_array(), train_data.labels_array()
    x_val, y_val = val_data.inputs_array(), val_data.labels_array()
    n = len(y_train)

    log = TrainLog(model_kind=model_kind, lam=lam)
    best_params = params.copy()
    best_val = math.inf
    since_best = 0
    log.stop_reason = "max_epochs"

    for epoch in range(1, config.max_epochs + 1):
        order = root.child(1, epoch).permutation(n)
        sum_cls = sum_rc = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            breakdown, grads = batch_loss(params, x_train[idx], y_train[idx], lam)
            if not breakdown.is_finite() or not grads.is_finite():
                raise _diverged(runlog, epoch, "training loss")
            if config.grad_clip_norm is not None:
                total_norm = grads.global_norm()
                if total_norm > config.grad_clip_norm:
                    grads = grads.scaled(config.grad_clip_norm / total_norm)
            params, state = adam_step(params, grads, state, config)
            sum_cls += breakdown.l_cls * len(idx)
            sum_rc += breakdown.l_rc * len(idx)
        train_breakdown = LossBreakdown.of(sum_cls / n, sum_rc / n, lam)

        val = evaluate_loss(params, x_val, y_val, lam)
        if not val.breakdown.is_finite():
            raise _diverged(runlog, epoch, "validation loss")
        predicted = np.argmax(val.logits, axis=-1)
        record = EpochRecord(
            epoch=epoch,
            train=train_breakdown,
            val=val.breakdown,
            val_accuracy=float(np.mean(predicted == y_val)),
            val_mean_drift=mean_drift(val.trajectory.states),
        )
        log.records.append(record)

        if val.breakdown.total < best_val:
            best_val = val.breakdown.total
            best_params = params.copy()
            log.best_epoch = epoch
            since_best = 0
            if runlog is not None:
                runlog.set_var("best_epoch", epoch, desc="Epoch with the lowest validation total so far")
        else:
            since_best += 1

        if runlog is not None:
            runlog.add_event("epoch", {
                "model": model_kind,
                "epoch": epoch,
                "train": train_breakdown.to_dict(),
                "val": val.breakdown.to_dict(),
                "val_accuracy": record.val_accuracy,
                "val_mean_drift": record.val_mean_drift,
                "since_best": since_best,
            })

        if since_best >= config.patience:
            log.stop_reason = "early_stopping"
            break

    if runlog is not None:
        runlog.add_event("training", {
            "model": model_kind,
            "lambda": lam,
            "best_epoch": log.best_epoch,
            "stop_reason": log.stop_reason,
            "best_val_total": log.best_val_loss,
        })
    return best_params, log


#############################################################################
#############################################################################

### LAMBDA SWEEP

@dataclass
class SweepResult:
    """One training run per λ and the λ with the lowest validation loss."""

    runs: dict[float, tuple[CellParams, TrainLog]]
    selected_lambda: float

    @property
    def selected(self) -> tuple[CellParams, TrainLog]:
        return self.runs[self.selected_lambda]

    def csv_rows(self) -> list[list[str]]:
        rows = [["lambda", "best_epoch", "best_val_total", "best_val_l_rc", "best_val_accuracy", "selected"]]
        for lam in sorted(self.runs):
            log = self.runs[lam][1]
            best = log.best_record
            rows.append([
                fmt_float(lam), str(log.best_epoch), fmt_float(best.val.total),
                fmt_float(best.val.l_rc), fmt_float(best.val_accuracy),
                "1" if lam == self.selected_lambda else "0",
            ])
        return rows


def lambda_sweep(train_data: Dataset, val_data: Dataset, config: TrainConfig,
                 grid: Sequence[float] = DEFAULT_LAMBDA_GRID, model_kind="rc-gru",
                 runlog: Optional[RUNLOG] = None) -> SweepResult:
    """
    Train once per λ with the same seed and select by validation loss.

    The selection criterion is each run's best validation total loss at its
    own λ; ties go to the smaller λ.

    Raises:
        ParameterError: On an empty grid, a negative λ or a baseline model kind.
    """
    if not grid:
        raise ParameterError("lambda grid must be nonempty")
    if any(lam < 0 for lam in grid):
        raise ParameterError("lambda grid values must be >= 0, got {}".format(list(grid)))
    if not resolve_model(model_kind)[1]:
        raise ParameterError("lambda sweep needs a regularized model kind, got '{}'".format(model_kind))
    runs = {}
    selected = None
    for lam in sorted(float(v) for v in set(grid)):
        params, log = train(model_kind, train_data, val_data, config.with_lambda(lam), runlog=runlog)
        runs[lam] = (params, log)
        if selected is None or log.best_val_loss < runs[selected][1].best_val_loss:
            selected = lam
    if runlog is not None:
        runlog.set_var("selected_lambda", selected, desc="Sweep value with the lowest best validation total")
        runlog.add_event("sweep", {
            "model": model_kind,
            "grid": sorted(runs),
            "selected_lambda": selected,
            "best_val_total": {fmt_float(lam): runs[lam][1].best_val_loss for lam in sorted(runs)},
        })
    return SweepResult(runs=runs, selected_lambda=selected)
