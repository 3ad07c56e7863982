"""
Training objective for SteadyRNN.

    L = L_cls + λ · L_rc

``L_cls`` is softmax cross-entropy on the readout of the final hidden state
``h_T``. ``L_rc`` is the representation consistency loss, the mean squared
Euclidean step between consecutive hidden states:

    L_rc = 1/(T−1) · Σ_{t=2..T} ‖h_t − h_{t−1}‖²

Both are computed per sequence and averaged over the batch. Their gradients
are injected per time step into the cells' backward pass, so the returned
parameter gradient is exact for the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from steadyrnn._util import ParameterError, SequenceTooShortError
from steadyrnn.cells import CellParams, HiddenTrajectory, ParamGrads, backward, forward, readout


@dataclass(frozen=True)
class LossBreakdown:
    """Components of the objective for one batch.

    Attributes:
        l_cls: Mean classification loss.
        l_rc: Mean consistency loss.
        lam: Regularization strength λ.
        total: ``l_cls + lam * l_rc``.
    """

    l_cls: float
    l_rc: float
    lam: float
    total: float

    @classmethod
    def of(cls, l_cls, l_rc, lam) -> LossBreakdown:
        l_cls, l_rc, lam = float(l_cls), float(l_rc), float(lam)
        return cls(l_cls=l_cls, l_rc=l_rc, lam=lam, total=l_cls + lam * l_rc)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.l_cls) and np.isfinite(self.l_rc) and np.isfinite(self.total))

    def to_dict(self) -> dict[str, float]:
        return {"l_cls": self.l_cls, "l_rc": self.l_rc, "lambda": self.lam, "total": self.total}


def cross_entropy(logits: ArrayLike, label: Union[int, ArrayLike]) -> tuple[Any, NDArray[np.float64]]:
    """
    Numerically stable softmax cross-entropy.

    Args:
        logits: Shape ``(..., C)``.
        label: Class index, or an integer array matching the batch shape.

    Returns:
        ``(loss, dlogits)`` with ``dlogits = softmax(logits) − onehot(label)``.
        ``loss`` is a float for a single example, an array for a batch.

    Raises:
        ParameterError: When a label is outside ``[0, C)``.
    """
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(label)
    num_classes = z.shape[-1]
    if labels.shape != z.shape[:-1]:
        raise ParameterError("labels shape {} does not match logits batch shape {}".format(
            labels.shape, z.shape[:-1]))
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ParameterError("label out of range [0, {})".format(num_classes))
    labels = labels.astype(np.int64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    total = np.sum(exp, axis=-1, keepdims=True)
    log_probs = shifted - np.log(total)
    picked = np.take_along_axis(log_probs, labels[..., None], axis=-1)[..., 0]
    grad = exp / total
    np.put_along_axis(grad, labels[..., None], np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0, axis=-1)
    loss = -picked
    if loss.ndim == 0:
        return float(loss), grad
    return loss, grad


def rc_loss(trajectory: Union[HiddenTrajectory, ArrayLike]) -> tuple[Any, NDArray[np.float64]]:
    """
    Representation consistency loss and its gradient with respect to each h_t.

    The gradient treats ``h_1..h_T`` as free variables; chaining through the
    recurrence is backward's job.

    Args:
        trajectory: A HiddenTrajectory or a states array ``(..., T, k)``.

    Returns:
        ``(l_rc, dh)``. ``l_rc`` is a float per sequence (an array for a
        batch); ``dh`` has the shape of the states.

    Raises:
        SequenceTooShortError: When T < 2.
    """
    states = trajectory.states if isinstance(trajectory, HiddenTrajectory) else np.asarray(trajectory, dtype=np.float64)
    T = states.shape[-2]
    if T < 2:
        raise SequenceTooShortError("consistency loss needs T >= 2, got T = {}".format(T))
    diff = states[..., 1:, :] - states[..., :-1, :]
    l_rc = np.sum(diff * diff, axis=(-2, -1)) / (T - 1)
    scale = 2.0 / (T - 1)
    dh = np.zeros_like(states)
    dh[..., 1:, :] += scale * diff
    dh[..., :-1, :] -= scale * diff
    if l_rc.ndim == 0:
        return float(l_rc), dh
    return l_rc, dh


@dataclass
class ForwardResult:
    """Everything one loss evaluation computes, kept for logging."""

    trajectory: HiddenTrajectory
    logits: NDArray[np.float64]
    breakdown: LossBreakdown
    per_sequence_rc: NDArray[np.float64]


def _evaluate(params, inputs, labels, lam):
    if lam < 0:
        raise ParameterError("lambda must be >= 0, got {}".format(lam))
    traj = forward(params, inputs)
    if traj.length < 2:
        raise SequenceTooShortError("objective needs T >= 2, got T = {}".format(traj.length))
    logits = readout(params, traj.final)
    ce, dlogits = cross_entropy(logits, labels)
    rc, dh_rc = rc_loss(traj)
    breakdown = LossBreakdown.of(np.mean(ce), np.mean(rc), lam)
    return traj, logits, dlogits, np.atleast_1d(rc), dh_rc, breakdown


def evaluate_loss(params: CellParams, inputs: ArrayLike, labels: ArrayLike, lam: float) -> ForwardResult:
    """Forward-only objective over a batch (used for validation)."""
    traj, logits, _, rc, _, breakdown = _evaluate(params, inputs, labels, lam)
    return ForwardResult(trajectory=traj, logits=logits, breakdown=breakdown, per_sequence_rc=rc)


def batch_loss(params: CellParams, inputs: ArrayLike, labels: ArrayLike,
               lam: float) -> tuple[LossBreakdown, ParamGrads]:
    """
    Objective and exact gradient over a batch of sequences.

    ``inputs`` is ``(B, T, d)`` with integer ``labels`` of shape ``(B,)``, or a
    single ``(T, d)`` sequence with a scalar label. Both loss terms are
    per-sequence means averaged over the batch. With ``lam == 0`` the
    consistency gradient is never injected, so the result is bitwise the
    unregularized one.
    """
    traj, _, dlogits, _, dh_rc, breakdown = _evaluate(params, inputs, labels, lam)
    n = int(np.prod(traj.states.shape[:-2], dtype=np.int64))
    dlogits = dlogits / n
    upstream = np.zeros_like(traj.states)
    upstream[..., -1, :] = dlogits @ params.arrays["V"]
    if lam != 0:
        upstream += (lam / n) * dh_rc
    grads, _ = backward(params, traj, upstream)
    grads.arrays["V"] = dlogits.reshape(-1, dlogits.shape[-1]).T @ traj.final.reshape(-1, traj.final.shape[-1])
    grads.arrays["c"] = dlogits.reshape(-1, dlogits.shape[-1]).sum(axis=0)
    return breakdown, grads


def total_loss(params: CellParams, sample: Any, lam: float) -> tuple[LossBreakdown, ParamGrads]:
    """Objective and gradient for one SequenceSample (anything with ``inputs`` and ``label``)."""
    return batch_loss(params, sample.inputs, sample.label, lam)
