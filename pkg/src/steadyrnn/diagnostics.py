"""
Drift and stability diagnostics.

Representation drift is a hidden-state step that is large relative to the
input step that caused it. ``drift_report`` measures it per time step as the
ratio

    ‖h_t − h_{t−1}‖ / (‖x_t − x_{t−1}‖ + ε)

and reports two bounds on the largest step:

- the provable one, ``max_t ‖h_t − h_{t−1}‖ ≤ √((T−1)·L_rc)``, which follows
  from the definition of L_rc and is checked on every report;
- the empirical one, ``max_t ‖h_t − h_{t−1}‖ ≤ √(L_rc/λ)``, which can fail
  for large λ and is therefore only recorded, never enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from steadyrnn._util import ParameterError, SequenceTooShortError, ShapeError, fmt_float
from steadyrnn.cells import HiddenTrajectory
from steadyrnn.linalg import norm
from steadyrnn.objective import rc_loss


DEFAULT_EPSILON = 1e-8
DEFAULT_DRIFT_THRESHOLD = 10.0
BOUND_SLACK = 1e-9

CSV_COLUMNS = ("t", "drift", "input_delta", "ratio")


@dataclass
class DriftReport:
    """Per-step drift of one sequence and the bounds on it.

    Attributes:
        per_step_drift: ``‖h_t − h_{t−1}‖`` for t = 2..T.
        per_step_input_delta: ``‖x_t − x_{t−1}‖`` for t = 2..T.
        drift_ratios: Drift over (input delta + ε).
        mean_drift: Mean of per_step_drift.
        max_drift: Max of per_step_drift.
        l_rc: Consistency loss of the trajectory.
        lam: λ the bound is reported against.
        empirical_bound_rhs: ``√(l_rc/λ)``; ``inf`` when λ = 0.
        empirical_bound_holds: Whether ``max_drift`` is within it.
        algebraic_bound_rhs: ``√((T−1)·l_rc)``.
        drifting_steps: Steps whose ratio exceeds ``threshold``.
        threshold: Ratio above which a step counts as drifting.
    """

    per_step_drift: list[float]
    per_step_input_delta: list[float]
    drift_ratios: list[float]
    mean_drift: float
    max_drift: float
    l_rc: float
    lam: float
    empirical_bound_rhs: float
    empirical_bound_holds: bool
    algebraic_bound_rhs: float
    drifting_steps: int = 0
    threshold: float = DEFAULT_DRIFT_THRESHOLD
    epsilon: float = field(default=DEFAULT_EPSILON, repr=False)

    def csv_rows(self) -> list[list[str]]:
        """
        Rows for the per-sequence drift CSV: header, one row per step, then a
        ``mean`` summary row.

        ``t`` is 1-based and names the later state of each pair, so the first
        row is t = 2.
        """
        rows = [list(CSV_COLUMNS)]
        for offset, (d, dx, ratio) in enumerate(zip(self.per_step_drift, self.per_step_input_delta, self.drift_ratios)):
            rows.append([str(offset + 2), fmt_float(d), fmt_float(dx), fmt_float(ratio)])
        rows.append([
            "mean",
            fmt_float(self.mean_drift),
            fmt_float(float(np.mean(self.per_step_input_delta))),
            fmt_float(float(np.mean(self.drift_ratios))),
        ])
        return rows

    def summary(self) -> dict[str, object]:
        """Scalar fields, for summaries and RUNLOG events."""
        return {
            "mean_drift": self.mean_drift,
            "max_drift": self.max_drift,
            "l_rc": self.l_rc,
            "lambda": self.lam,
            "empirical_bound_rhs": self.empirical_bound_rhs,
            "empirical_bound_holds": self.empirical_bound_holds,
            "algebraic_bound_rhs": self.algebraic_bound_rhs,
            "drifting_steps": self.drifting_steps,
        }


def drift_report(trajectory: Union[HiddenTrajectory, ArrayLike], inputs: ArrayLike, lam: float,
                 epsilon: float = DEFAULT_EPSILON,
                 threshold: float = DEFAULT_DRIFT_THRESHOLD) -> DriftReport:
    """
    Measure drift over one sequence.

    Args:
        trajectory: HiddenTrajectory or a ``(T, k)`` states array.
        inputs: The ``(T, d)`` inputs that produced it.
        lam: λ for the empirical bound (reported only).
        epsilon: Denominator guard of the ratio.
        threshold: Ratio above which a step counts as drifting.

    Raises:
        SequenceTooShortError: When T < 2.
        ParameterError: When ``epsilon <= 0`` or ``lam < 0``.
        AssertionError: If the provable bound is ever violated.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be > 0, got {}".format(epsilon))
    if lam < 0:
        raise ParameterError("lambda must be >= 0, got {}".format(lam))
    states = trajectory.states if isinstance(trajectory, HiddenTrajectory) else np.asarray(trajectory, dtype=np.float64)
    x = np.asarray(inputs, dtype=np.float64)
    if states.ndim != 2 or x.ndim != 2:
        raise ShapeError("drift_report takes one sequence: states {} and inputs {}".format(states.shape, x.shape))
    if states.shape[0] < 2:
        raise SequenceTooShortError("drift needs T >= 2, got T = {}".format(states.shape[0]))
    if x.shape[0] != states.shape[0]:
        raise ShapeError("inputs have {} steps, states have {}".format(x.shape[0], states.shape[0]))

    drift = norm(np.diff(states, axis=0))
    delta = norm(np.diff(x, axis=0))
    ratios = drift / (delta + epsilon)
    l_rc, _ = rc_loss(states)
    T = states.shape[0]

    max_drift = float(np.max(drift))
    algebraic_rhs = math.sqrt((T - 1) * l_rc)
    if max_drift > algebraic_rhs + BOUND_SLACK * max(1.0, algebraic_rhs):
        raise AssertionError("max drift {} exceeds sqrt((T-1)*L_rc) = {}".format(max_drift, algebraic_rhs))

    if lam > 0:
        empirical_rhs = math.sqrt(l_rc / lam)
        empirical_holds = max_drift <= empirical_rhs
    else:
        empirical_rhs = math.inf
        empirical_holds = True

    return DriftReport(
        per_step_drift=[float(v) for v in drift],
        per_step_input_delta=[float(v) for v in delta],
        drift_ratios=[float(v) for v in ratios],
        mean_drift=float(np.mean(drift)),
        max_drift=max_drift,
        l_rc=float(l_rc),
        lam=float(lam),
        empirical_bound_rhs=empirical_rhs,
        empirical_bound_holds=bool(empirical_holds),
        algebraic_bound_rhs=algebraic_rhs,
        drifting_steps=int(np.sum(ratios > threshold)),
        threshold=float(threshold),
        epsilon=float(epsilon),
    )


def mean_drift(states: ArrayLike) -> float:
    """Mean step norm over every sequence and step of a ``(..., T, k)`` batch."""
    arr = np.asarray(states, dtype=np.float64)
    if arr.shape[-2] < 2:
        raise SequenceTooShortError("drift needs T >= 2, got T = {}".format(arr.shape[-2]))
    return float(np.mean(norm(np.diff(arr, axis=-2))))


def hold_rate(reports: list[DriftReport]) -> float:
    """Fraction of reports whose empirical bound holds."""
    if not reports:
        raise ParameterError("hold_rate needs at least one report")
    return sum(1 for r in reports if r.empirical_bound_holds) / len(reports)
