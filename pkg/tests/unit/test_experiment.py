"""
Unit tests for steadyrnn.experiment.

Split preparation, single-model scoring, the multi-seed comparison and
batch drift reports, on the tiny synthetic dataset with a few epochs.
"""

from __future__ import annotations

import numpy as np
import pytest

from steadyrnn._util import ParameterError
from steadyrnn.cells import CellParams
from steadyrnn.config import RunConfig
from steadyrnn.experiment import (
    RUN_COLUMNS,
    ComparisonResults,
    drift_reports,
    drift_summary_lines,
    fit_model,
    prepare_splits,
    run_comparison,
)
from steadyrnn.linalg import Rng
from steadyrnn.runlog import RUNLOG


@pytest.fixture
def small_config():
    """Few epochs, a narrow cell and two seeds."""
    return RunConfig({
        "hidden_dim": 4,
        "max_epochs": 2,
        "batch_size": 16,
        "learning_rate": 0.01,
        "n_seeds": 2,
        "compare_models": ("gru", "rc-gru"),
        "lambda_grid": (0.05, 0.1),
    })


# ============================================================================
# Splits
# ============================================================================


class TestPrepareSplits:
    """
    Tests for the shared split and normalize protocol.
    """

    def test_train_is_standardized(self, tiny_dataset, small_config):
        splits = prepare_splits(tiny_dataset, small_config, seed=0)
        flat = splits.train.inputs_array().reshape(-1, 2)
        np.testing.assert_allclose(flat.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(flat.std(axis=0), 1.0, rtol=1e-12)
        assert splits.val.normalization is splits.stats

    def test_corruption_only_touches_test(self, tiny_dataset, small_config):
        clean = prepare_splits(tiny_dataset, small_config, seed=0)
        noisy = prepare_splits(tiny_dataset, small_config, seed=0, test_noise_std=0.5)
        np.testing.assert_array_equal(clean.train.inputs_array(), noisy.train.inputs_array())
        np.testing.assert_array_equal(clean.val.inputs_array(), noisy.val.inputs_array())
        assert not np.array_equal(clean.test.inputs_array(), noisy.test.inputs_array())

    def test_patient_subsampling(self, tiny_dataset, small_config):
        half = small_config.with_overrides(["train_patient_frac=0.5"])
        splits = prepare_splits(tiny_dataset, half, seed=0)
        assert len(splits.train.patients()) == 4


# ============================================================================
# Models and Comparison
# ============================================================================


class TestFitModel:
    """
    Tests for training and scoring one model kind.
    """

    def test_baseline_run(self, tiny_dataset, small_config):
        splits = prepare_splits(tiny_dataset, small_config, seed=0)
        run = fit_model("gru", splits, small_config, seed=0)
        assert run.lam == 0.0
        assert 0.0 <= run.metrics.accuracy <= 1.0
        assert run.confusion.total == len(splits.test)
        assert isinstance(run.params, CellParams)
        assert len(run.row()) == len(RUN_COLUMNS)

    def test_regularized_run_sweeps(self, tiny_dataset, small_config):
        splits = prepare_splits(tiny_dataset, small_config, seed=0)
        run = fit_model("rc-gru", splits, small_config, seed=0)
        assert run.lam in (0.05, 0.1)
        assert run.test_l_rc >= 0.0


class TestRunComparison:
    """
    Tests for the multi-seed comparison.
    """

    def test_runs_and_aggregates(self, tiny_dataset, small_config):
        runlog = RUNLOG(run_id="c")
        results = run_comparison(tiny_dataset, small_config, runlog=runlog)
        assert results.seeds == [0, 1]
        assert [(r.seed, r.model_kind) for r in results.runs] == [
            (0, "gru"), (0, "rc-gru"), (1, "gru"), (1, "rc-gru")]
        assert all(r.params is None for r in results.runs)
        mean, std = results.aggregate("gru")["accuracy"]
        assert 0.0 <= mean <= 1.0 and std >= 0.0
        assert results.accuracy_gap() == pytest.approx(
            results.aggregate("rc-gru")["accuracy"][0] - mean)
        rows = results.csv_rows()
        assert rows[0] == list(RUN_COLUMNS)
        assert len(rows) == 5
        assert sum(1 for e in runlog.get_logs() if e["content"].startswith("Comparison complete")) == 4

    def test_deterministic(self, tiny_dataset, small_config):
        a = run_comparison(tiny_dataset, small_config)
        b = run_comparison(tiny_dataset, small_config)
        assert a.csv_rows() == b.csv_rows()
        assert a.to_text() == b.to_text()

    def test_text_table(self, tiny_dataset, small_config):
        text = run_comparison(tiny_dataset, small_config).to_text()
        assert text.startswith("seeds: 0,1\n")
        assert "accuracy gap rc-gru - gru:" in text
        assert "±" in text

    def test_reference_footer_lists_every_baseline(self):
        """The full-scale reference figures cover lstm, gru and rc-gru on all four metrics."""
        text = ComparisonResults().to_text()
        assert "  lstm     accuracy 91.3 precision 90.8 recall 90.5 f1 90.6\n" in text
        assert "  gru      accuracy 92.1 precision 91.6 recall 91.2 f1 91.4\n" in text
        assert "  rc-gru   accuracy 94.1 precision 93.7 recall 93.2 f1 93.4\n" in text

    def test_gap_needs_both_models(self, tiny_dataset, small_config):
        only_gru = small_config.with_overrides(["compare_models=gru", "n_seeds=1"])
        results = run_comparison(tiny_dataset, only_gru)
        assert results.accuracy_gap() is None
        with pytest.raises(ParameterError):
            results.aggregate("rc-gru")


# ============================================================================
# Drift
# ============================================================================


class TestDriftReports:
    """
    Tests for per-window drift over a dataset.
    """

    def test_one_report_per_window(self, tiny_splits):
        _, _, test = tiny_splits
        params = CellParams.init("gru", 2, 4, 3, Rng(0))
        reports = drift_reports(params, test, 0.1, epsilon=1e-8, threshold=10.0)
        assert len(reports) == len(test)
        assert all(len(r.per_step_drift) == test.window_length - 1 for r in reports)

    def test_summary_lines(self, tiny_splits):
        _, _, test = tiny_splits
        params = CellParams.init("gru", 2, 4, 3, Rng(0))
        lines = drift_summary_lines(drift_reports(params, test, 0.1, epsilon=1e-8, threshold=10.0))
        assert lines[0] == "sequences = {}".format(len(test))
        assert lines[1] == "lambda = 0.1"
        rate = float(lines[5].split(" = ")[1])
        assert 0.0 <= rate <= 1.0

    def test_summary_of_nothing(self):
        with pytest.raises(ParameterError):
            drift_summary_lines([])
