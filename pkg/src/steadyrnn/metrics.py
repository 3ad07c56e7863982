"""
Classification metrics from a confusion matrix.

Rows are the true class, columns the predicted class. Precision, recall and
F1 are macro averages: the unweighted mean over classes, so a rare class
counts as much as a common one. A class with an empty denominator
contributes 0 for that metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from steadyrnn._util import ParameterError, ShapeError
from steadyrnn.cells import CellParams, forward, readout


METRIC_KEYS = ("accuracy", "precision_macro", "recall_macro", "f1_macro")


@dataclass(frozen=True)
class ConfusionMatrix:
    """C × C counts; entry (i, j) is true class i predicted as j."""

    counts: NDArray[np.int64]

    def __post_init__(self) -> None:
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ShapeError("confusion matrix must be square, got shape {}".format(counts.shape))
        if np.any(counts < 0):
            raise ParameterError("confusion matrix counts must be >= 0")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_predictions(cls, truth: ArrayLike, predicted: ArrayLike, num_classes: int) -> ConfusionMatrix:
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(truth, dtype=np.int64), np.asarray(predicted, dtype=np.int64)), 1)
        return cls(counts)

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def csv_rows(self) -> list[list[str]]:
        """Header ``true\\pred,0,1,...`` then one row per true class."""
        header = ["true\\pred"] + [str(j) for j in range(self.num_classes)]
        return [header] + [[str(i)] + [str(int(v)) for v in row] for i, row in enumerate(self.counts)]


@dataclass(frozen=True)
class MetricSummary:
    """Table-style metrics, each in [0, 1], plus the per-class values."""

    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision: tuple[float, ...] = ()
    recall: tuple[float, ...] = ()
    f1: tuple[float, ...] = ()

    def to_dict(self) -> dict[str, float]:
        return {key: getattr(self, key) for key in METRIC_KEYS}

    def to_text(self) -> str:
        """Fixed keys, percentages with one decimal."""
        return "".join("{}: {:.1f}\n".format(key, 100.0 * value) for key, value in self.to_dict().items())


def predict(params: CellParams, inputs: ArrayLike) -> NDArray[np.int64]:
    """Argmax of the readout on ``h_T``; ties go to the smaller class index."""
    traj = forward(params, inputs)
    return np.argmax(readout(params, traj.final), axis=-1).astype(np.int64)


def evaluate(params: CellParams, data) -> ConfusionMatrix:
    """
    Confusion matrix of ``params`` over a Dataset.

    Raises:
        ShapeError: When the dataset's width or class count differs from the model's.
    """
    if data.input_dim != params.input_dim:
        raise ShapeError("dataset has input_dim {}, model expects {}".format(data.input_dim, params.input_dim))
    if data.num_classes > params.num_classes:
        raise ShapeError("dataset has {} classes, model has {}".format(data.num_classes, params.num_classes))
    if len(data) == 0:
        return ConfusionMatrix(np.zeros((params.num_classes, params.num_classes), dtype=np.int64))
    predicted = predict(params, data.inputs_array())
    return ConfusionMatrix.from_predictions(data.labels_array(), predicted, params.num_classes)


def summarize(cm: ConfusionMatrix) -> MetricSummary:
    """
    Accuracy and macro precision, recall and F1.

    Raises:
        ParameterError: When the matrix is empty.
    """
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise ParameterError("cannot summarize an empty confusion matrix")
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2.0 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return MetricSummary(
        accuracy=float(tp.sum() / total),
        precision_macro=float(np.mean(precision)),
        recall_macro=float(np.mean(recall)),
        f1_macro=float(np.mean(f1)),
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
    )
