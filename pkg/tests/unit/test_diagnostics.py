"""
Unit tests for steadyrnn.diagnostics.
"""

from __future__ import annotations

import importlib
import math

import numpy as np
import pytest

from steadyrnn._util import ParameterError, SequenceTooShortError
from steadyrnn.diagnostics import drift_report, hold_rate, mean_drift
from steadyrnn.linalg import Rng


# States 0, 1, 3 over T=3: steps 1 and 2, L_rc = 2.5.
STATES = [[0.0], [1.0], [3.0]]
INPUTS = [[0.0], [1.0], [2.0]]


class TestDriftReport:
    """
    Tests for per-sequence drift reports.
    """

    def test_known_trajectory(self):
        report = drift_report(STATES, INPUTS, lam=0.1)
        assert report.per_step_drift == [1.0, 2.0]
        assert report.per_step_input_delta == [1.0, 1.0]
        assert report.max_drift == 2.0
        assert report.mean_drift == 1.5
        assert report.l_rc == 2.5
        assert report.empirical_bound_rhs == pytest.approx(5.0, rel=1e-15)
        assert report.empirical_bound_holds
        assert report.algebraic_bound_rhs == pytest.approx(math.sqrt(5.0), rel=1e-15)

    def test_empirical_bound_can_fail(self):
        """
        λ = 10 gives √(2.5/10) = 0.5 < 2: reported as not holding, no error.

        Remove this test if: The empirical bound becomes enforced.
        """
        report = drift_report(STATES, INPUTS, lam=10.0)
        assert report.empirical_bound_rhs == pytest.approx(0.5, rel=1e-15)
        assert not report.empirical_bound_holds

    def test_zero_lambda_bound_is_infinite(self):
        report = drift_report(STATES, INPUTS, lam=0.0)
        assert report.empirical_bound_rhs == math.inf
        assert report.empirical_bound_holds

    def test_constant_trajectory(self):
        report = drift_report(np.ones((5, 3)), Rng(1).normal((5, 2)), lam=0.1)
        assert report.max_drift == 0.0
        assert report.l_rc == 0.0
        assert report.empirical_bound_holds
        assert report.drifting_steps == 0

    def test_algebraic_bound_on_random_trajectories(self):
        """max step ≤ √((T−1)·L_rc) and mean step² = L_rc on 1000 random trajectories."""
        root = Rng(77)
        for trial in range(1000):
            rng = root.child(trial)
            T = 2 + trial % 15
            states = rng.child(0).normal((T, 3), std=float(1 + trial % 4))
            report = drift_report(states, rng.child(1).normal((T, 2)), lam=0.1)
            assert report.max_drift <= report.algebraic_bound_rhs * (1 + 1e-12)
            squares = np.mean(np.square(report.per_step_drift))
            assert report.l_rc > 0.0
            assert squares == pytest.approx(report.l_rc, rel=1e-9)

    def test_algebraic_bound_violation_raises(self, monkeypatch):
        """A consistency loss too small for the observed steps fails loudly, even under python -O."""
        module = importlib.import_module("steadyrnn.diagnostics")
        real = module.rc_loss
        monkeypatch.setattr(module, "rc_loss", lambda states: (real(states)[0] / 100.0, None))
        with pytest.raises(AssertionError, match="exceeds"):
            drift_report(STATES, INPUTS, lam=0.1)

    def test_ratios_ignore_constant_shift(self):
        """Shifting every state by the same vector leaves drift and ratios unchanged."""
        states = Rng(3).normal((8, 4))
        inputs = Rng(4).normal((8, 2))
        base = drift_report(states, inputs, lam=0.05)
        shifted = drift_report(states + np.array([5.0, -2.0, 0.5, 1.0]), inputs, lam=0.05)
        np.testing.assert_allclose(shifted.drift_ratios, base.drift_ratios, rtol=1e-12)

    def test_constant_input_uses_epsilon(self):
        report = drift_report(STATES, np.zeros((3, 1)), lam=0.1, epsilon=1e-8, threshold=10.0)
        assert report.drift_ratios == pytest.approx([1e8, 2e8])
        assert report.drifting_steps == 2

    def test_single_step_raises(self):
        with pytest.raises(SequenceTooShortError):
            drift_report([[1.0]], [[0.0]], lam=0.1)

    def test_bad_epsilon_raises(self):
        with pytest.raises(ParameterError):
            drift_report(STATES, INPUTS, lam=0.1, epsilon=0.0)

    def test_csv_rows(self):
        rows = drift_report(STATES, INPUTS, lam=0.1, epsilon=1.0).csv_rows()
        assert rows[0] == ["t", "drift", "input_delta", "ratio"]
        assert rows[1] == ["2", "1.0", "1.0", "0.5"]
        assert rows[2] == ["3", "2.0", "1.0", "1.0"]
        assert rows[3] == ["mean", "1.5", "1.0", "0.75"]


class TestAggregates:
    """
    Tests for batch drift helpers.
    """

    def test_mean_drift_over_batch(self):
        states = np.array([STATES, [[0.0], [0.0], [0.0]]])
        assert mean_drift(states) == 0.75

    def test_hold_rate(self):
        reports = [drift_report(STATES, INPUTS, lam=lam) for lam in (0.1, 10.0, 0.0, 20.0)]
        assert hold_rate(reports) == 0.5

    def test_hold_rate_of_nothing_raises(self):
        with pytest.raises(ParameterError):
            hold_rate([])
