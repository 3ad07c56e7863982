"""
SteadyRNN: gated recurrent classifiers that keep their hidden state steady.

Core Idea:
    - Classification loss on the final hidden state, plus λ times the mean
      squared step between consecutive hidden states (the consistency loss)
    - Exact gradients through time for GRU and LSTM cells, in numpy
    - Drift diagnostics: per-step hidden-state change relative to input change
    - Deterministic: every random draw comes from a seeded, keyed stream

Building Blocks:
    - CellParams / forward / backward: GRU and LSTM cells with BPTT
    - total_loss / batch_loss: the combined objective and its gradient
    - drift_report: drift ratios and the bounds on the largest step
    - synth_generate / load_csv / patient_split / zscore_fit_apply: data
    - train / lambda_sweep / adam_step: optimization with early stopping
    - evaluate / summarize: confusion matrix and macro metrics
    - RunConfig / prepare_splits / run_comparison: the experiment protocol
    - RUNLOG: event-sourced trace of a run

Basic Usage:
    >>> from steadyrnn import Rng, synth_generate, patient_split, zscore_fit_apply, train, TrainConfig
    >>>
    >>> data = synth_generate(Rng(0))
    >>> tr, va, te = patient_split(data)
    >>> tr, (va, te), stats = zscore_fit_apply(tr, [va, te])
    >>> params, log = train("rc-gru", tr, va, TrainConfig(lam=0.05, max_epochs=30))
    >>> log.best_epoch, log.stop_reason
"""

from __future__ import annotations

# Math and cells
from steadyrnn.linalg import Rng, gaussian, matvec, norm, sigmoid, tanh
from steadyrnn.cells import CellParams, HiddenTrajectory, ParamGrads, SavedModel, backward, forward, readout

# Objective and diagnostics
from steadyrnn.objective import LossBreakdown, batch_loss, cross_entropy, evaluate_loss, rc_loss, total_loss
from steadyrnn.diagnostics import DriftReport, drift_report, hold_rate, mean_drift

# Data
from steadyrnn.data import (
    Dataset,
    NormStats,
    SequenceSample,
    SplitSpec,
    corrupt,
    load_csv,
    patient_split,
    save_csv,
    subsample_patients,
    synth_generate,
    zscore_fit_apply,
)

# Training and evaluation
from steadyrnn.train import AdamState, SweepResult, TrainConfig, TrainLog, adam_step, lambda_sweep, train
from steadyrnn.metrics import ConfusionMatrix, MetricSummary, evaluate, summarize

# Experiments
from steadyrnn.config import RunConfig
from steadyrnn.experiment import ComparisonResults, ModelRun, drift_reports, prepare_splits, run_comparison
from steadyrnn.plot import drift_svg

# Logging and errors
from steadyrnn.runlog import RUNLOG
from steadyrnn._util import (
    ConfigError,
    DataError,
    DegenerateFeatureError,
    ModelFormatError,
    ParameterError,
    ParseError,
    SchemaError,
    SequenceTooShortError,
    ShapeError,
    SplitTooSmallError,
    SteadyError,
    TrainingDivergedError,
)

# Version
try:
    from importlib.metadata import version as _get_version

    __version__ = _get_version("steadyrnn")
except Exception:
    __version__ = "0.0.0"

# Public API
__all__ = [
    # Math and cells
    "Rng",
    "gaussian",
    "matvec",
    "norm",
    "sigmoid",
    "tanh",
    "CellParams",
    "HiddenTrajectory",
    "ParamGrads",
    "SavedModel",
    "forward",
    "backward",
    "readout",
    # Objective and diagnostics
    "LossBreakdown",
    "cross_entropy",
    "rc_loss",
    "total_loss",
    "batch_loss",
    "evaluate_loss",
    "DriftReport",
    "drift_report",
    "mean_drift",
    "hold_rate",
    # Data
    "Dataset",
    "NormStats",
    "SequenceSample",
    "SplitSpec",
    "synth_generate",
    "load_csv",
    "save_csv",
    "zscore_fit_apply",
    "patient_split",
    "subsample_patients",
    "corrupt",
    # Training and evaluation
    "TrainConfig",
    "AdamState",
    "TrainLog",
    "SweepResult",
    "adam_step",
    "train",
    "lambda_sweep",
    "ConfusionMatrix",
    "MetricSummary",
    "evaluate",
    "summarize",
    # Experiments
    "RunConfig",
    "prepare_splits",
    "run_comparison",
    "ComparisonResults",
    "ModelRun",
    "drift_reports",
    "drift_svg",
    # Logging and errors
    "RUNLOG",
    "SteadyError",
    "ShapeError",
    "DataError",
    "ParameterError",
    "SequenceTooShortError",
    "ParseError",
    "SchemaError",
    "DegenerateFeatureError",
    "SplitTooSmallError",
    "TrainingDivergedError",
    "ConfigError",
    "ModelFormatError",
    # Metadata
    "__version__",
]
