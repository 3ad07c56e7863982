"""
Experiment runner for SteadyRNN.

Everything between a raw Dataset and a results table: the split and
normalize protocol shared by every command, the multi-seed model
comparison, and batch drift reports.

A comparison trains every requested model on the same split for each seed.
Seed ``s`` uses ``seed + s`` for the split, initialization and shuffling.
Regularized models pick λ with a sweep on the validation split. The test
split is corrupted with extra noise in data units before normalization, so
all models see the same corrupted windows.

Example:
    >>> from steadyrnn.config import RunConfig
    >>> from steadyrnn.experiment import run_comparison
    >>> results = run_comparison(dataset, RunConfig({"n_seeds": 2, "max_epochs": 10}))
    >>> print(results.to_text())
    >>> results.accuracy_gap("rc-gru", "gru")
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from steadyrnn._util import ParameterError, fmt_float
from steadyrnn.cells import CellParams, forward
from steadyrnn.config import RunConfig
from steadyrnn.data import Dataset, NormStats, apply_zscore, corrupt, fit_zscore, patient_split, subsample_patients
from steadyrnn.diagnostics import DriftReport, drift_report, hold_rate, mean_drift
from steadyrnn.linalg import Rng
from steadyrnn.metrics import METRIC_KEYS, ConfusionMatrix, MetricSummary, evaluate, summarize
from steadyrnn.objective import evaluate_loss
from steadyrnn.runlog import RUNLOG
from steadyrnn.train import TrainLog, lambda_sweep, resolve_model, train


# Full-scale MIT-BIH figures, printed for context only.
REFERENCE_ROWS = (
    ("lstm", "91.3", "90.8", "90.5", "90.6"),
    ("gru", "92.1", "91.6", "91.2", "91.4"),
    ("rc-gru", "94.1", "93.7", "93.2", "93.4"),
)


#############################################################################
#############################################################################

### SPLITS

@dataclass
class PreparedSplits:
    """Normalized train/val/test windows and the stats fitted on train."""

    train: Dataset
    val: Dataset
    test: Dataset
    stats: NormStats


def prepare_splits(dataset: Dataset, config: RunConfig, seed: int,
                   test_noise_std=0.0, test_missing_frac=0.0) -> PreparedSplits:
    """
    Split by patient, optionally subsample and corrupt, then z-score.

    Stats are fitted on the (subsampled) training split only. Corruption
    of the test split happens in data units, before normalization.
    """
    root = Rng(seed)
    train_raw, val_raw, test_raw = patient_split(dataset, config.split_spec(seed=seed))
    train_raw = subsample_patients(train_raw, config["train_patient_frac"], root.child(4))
    test_raw = corrupt(test_raw, root.child(3), noise_std=test_noise_std, missing_frac=test_missing_frac)
    stats = fit_zscore(train_raw)
    return PreparedSplits(
        train=apply_zscore(train_raw, stats),
        val=apply_zscore(val_raw, stats),
        test=apply_zscore(test_raw, stats),
        stats=stats,
    )


#############################################################################
#############################################################################

### SINGLE MODEL

@dataclass
class ModelRun:
    """One trained model scored on its test split.

    Attributes:
        model_kind: Model kind that was trained.
        seed: Seed of the run.
        lam: λ the model was trained with (selected by sweep for rc kinds).
        metrics: Test-split metrics.
        test_l_rc: Mean consistency loss over the test split.
        test_mean_drift: Mean step norm over the test split.
        log: The training log.
        params: Trained parameters; dropped by comparisons to save memory.
        confusion: Test-split confusion matrix.
    """

    model_kind: str
    seed: int
    lam: float
    metrics: MetricSummary
    test_l_rc: float
    test_mean_drift: float
    log: TrainLog = field(repr=False)
    params: Optional[CellParams] = field(default=None, repr=False)
    confusion: Optional[ConfusionMatrix] = field(default=None, repr=False)

    def row(self) -> list[str]:
        return ([self.model_kind, str(self.seed), fmt_float(self.lam)]
                + [fmt_float(v) for v in self.metrics.to_dict().values()]
                + [fmt_float(self.test_l_rc), fmt_float(self.test_mean_drift),
                   str(self.log.best_epoch), self.log.stop_reason])


RUN_COLUMNS = (("model", "seed", "lambda") + METRIC_KEYS
               + ("test_l_rc", "test_mean_drift", "best_epoch", "stop_reason"))


def fit_model(model_kind: str, splits: PreparedSplits, config: RunConfig, seed: int,
              runlog: Optional[RUNLOG] = None) -> ModelRun:
    """Train one model kind (sweeping λ when regularized) and score it on test."""
    _, regularized = resolve_model(model_kind)
    train_config = config.train_config(seed=seed)
    if regularized:
        sweep = lambda_sweep(splits.train, splits.val, train_config, grid=config["lambda_grid"],
                             model_kind=model_kind, runlog=runlog)
        params, log = sweep.selected
        lam = sweep.selected_lambda
    else:
        params, log = train(model_kind, splits.train, splits.val, train_config, runlog=runlog)
        lam = 0.0
    return score_model(model_kind, params, log, splits.test, lam, seed)


def score_model(model_kind: str, params: CellParams, log: TrainLog, test: Dataset,
                lam: float, seed: int) -> ModelRun:
    result = evaluate_loss(params, test.inputs_array(), test.labels_array(), lam)
    confusion = evaluate(params, test)
    return ModelRun(
        model_kind=model_kind,
        seed=seed,
        lam=lam,
        metrics=summarize(confusion),
        test_l_rc=result.breakdown.l_rc,
        test_mean_drift=mean_drift(result.trajectory.states),
        log=log,
        params=params,
        confusion=confusion,
    )


#############################################################################
#############################################################################

### COMPARISON

@dataclass
class ComparisonResults:
    """Every ModelRun of a comparison, with mean ± std aggregation.

    Attributes:
        runs: One ModelRun per (seed, model), seed-major.
        models: Model kinds in table order.
        metadata: Comparison settings.
    """

    runs: list[ModelRun] = field(default_factory=list)
    models: tuple[str, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def seeds(self) -> list[int]:
        return sorted({r.seed for r in self.runs})

    def for_model(self, model_kind: str) -> list[ModelRun]:
        return [r for r in self.runs if r.model_kind == model_kind]

    def aggregate(self, model_kind: str) -> dict[str, tuple[float, float]]:
        """Metric name → (mean, population std) over seeds."""
        runs = self.for_model(model_kind)
        if not runs:
            raise ParameterError("no runs for model '{}'".format(model_kind))
        columns = {key: [r.metrics.to_dict()[key] for r in runs] for key in METRIC_KEYS}
        columns["test_l_rc"] = [r.test_l_rc for r in runs]
        columns["test_mean_drift"] = [r.test_mean_drift for r in runs]
        columns["lambda"] = [r.lam for r in runs]
        return {key: (float(np.mean(v)), float(np.std(v))) for key, v in columns.items()}

    def accuracy_gap(self, model_kind="rc-gru", baseline="gru") -> Optional[float]:
        """Mean test accuracy of ``model_kind`` minus ``baseline``; None if either is absent."""
        if model_kind not in self.models or baseline not in self.models:
            return None
        return self.aggregate(model_kind)["accuracy"][0] - self.aggregate(baseline)["accuracy"][0]

    def csv_rows(self) -> list[list[str]]:
        return [list(RUN_COLUMNS)] + [r.row() for r in self.runs]

    def summary(self) -> dict[str, Any]:
        return {
            "models": list(self.models),
            "seeds": self.seeds,
            "mean_accuracy": {m: self.aggregate(m)["accuracy"][0] for m in self.models},
            "accuracy_gap": self.accuracy_gap(),
        }

    def to_text(self) -> str:
        """
        Fixed-width table: metrics as percentages, mean ± std over seeds,
        then the accuracy gap and the published reference rows.
        """
        header = "{:<8} {:>13} {:>13} {:>13} {:>13} {:>12} {:>12} {:>8}".format(
            "model", "accuracy", "precision", "recall", "f1", "test_l_rc", "drift", "lambda")
        lines = ["seeds: {}".format(",".join(str(s) for s in self.seeds)), header]
        for model in self.models:
            agg = self.aggregate(model)
            cells = ["{:.1f} ± {:.1f}".format(100.0 * agg[k][0], 100.0 * agg[k][1]) for k in METRIC_KEYS]
            lines.append("{:<8} {:>13} {:>13} {:>13} {:>13} {:>12.4g} {:>12.4g} {:>8.3g}".format(
                model, *cells, agg["test_l_rc"][0], agg["test_mean_drift"][0], agg["lambda"][0]))
        gap = self.accuracy_gap()
        if gap is not None:
            lines.append("")
            lines.append("accuracy gap rc-gru - gru: {:+.1f}".format(100.0 * gap))
        lines.append("")
        lines.append("MIT-BIH reference (full protocol, not expected at this scale):")
        for row in REFERENCE_ROWS:
            lines.append("  {:<8} accuracy {} precision {} recall {} f1 {}".format(*row))
        return "\n".join(lines) + "\n"


def run_comparison(dataset: Dataset, config: RunConfig, runlog: Optional[RUNLOG] = None) -> ComparisonResults:
    """
    Train every model in ``compare_models`` for ``n_seeds`` seeds.

    Returns:
        ComparisonResults with one ModelRun per (seed, model).
    """
    models = tuple(config["compare_models"])
    results = ComparisonResults(models=models, metadata={
        "n_seeds": config["n_seeds"],
        "test_noise_std": config["test_noise_std"],
        "test_missing_frac": config["test_missing_frac"],
        "lambda_grid": list(config["lambda_grid"]),
    })
    for offset in range(config["n_seeds"]):
        seed = config["seed"] + offset
        splits = prepare_splits(dataset, config, seed,
                                test_noise_std=config["test_noise_std"],
                                test_missing_frac=config["test_missing_frac"])
        for model in models:
            run = fit_model(model, splits, config, seed, runlog=runlog)
            run.params = None
            results.runs.append(run)
            if runlog is not None:
                runlog.add_event("comparison", {
                    "model": model,
                    "seed": seed,
                    "lambda": run.lam,
                    "metrics": run.metrics.to_dict(),
                    "test_l_rc": run.test_l_rc,
                })
    return results


#############################################################################
#############################################################################

### DRIFT

def drift_reports(params: CellParams, data: Dataset, lam: float, epsilon: float,
                  threshold: float) -> list[DriftReport]:
    """One DriftReport per window, in dataset order."""
    inputs = data.inputs_array()
    trajectory = forward(params, inputs)
    return [
        drift_report(trajectory.states[i], inputs[i], lam, epsilon=epsilon, threshold=threshold)
        for i in range(len(data))
    ]


def drift_summary_lines(reports: list[DriftReport]) -> list[str]:
    """``key = value`` lines aggregating a batch of reports."""
    if not reports:
        raise ParameterError("drift summary needs at least one report")
    return [
        "sequences = {}".format(len(reports)),
        "lambda = {}".format(fmt_float(reports[0].lam)),
        "mean_drift = {}".format(fmt_float(float(np.mean([r.mean_drift for r in reports])))),
        "max_drift = {}".format(fmt_float(max(r.max_drift for r in reports))),
        "mean_l_rc = {}".format(fmt_float(float(np.mean([r.l_rc for r in reports])))),
        "bound_hold_rate = {}".format(fmt_float(hold_rate(reports))),
        "drifting_steps = {}".format(sum(r.drifting_steps for r in reports)),
        "threshold = {}".format(fmt_float(reports[0].threshold)),
    ]
