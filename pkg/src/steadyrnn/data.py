"""
Datasets for SteadyRNN.

Fixed-length multivariate windows with a label and a patient id, plus the
preprocessing protocol around them:

- ``synth_generate``: a seeded ECG-like surrogate (class waveforms, per-patient
  morphology, sensor noise, missing entries)
- ``load_csv`` / ``save_csv``: the flat CSV schema for externally
  preprocessed windows
- ``zscore_fit_apply``: per-feature standardization fitted on train only
- ``patient_split``: partition by patient so no patient leaks across splits
- ``corrupt``: extra noise and missingness for robustness experiments

Missing entries carry the last observed value forward and keep their mask.

CSV schema (UTF-8, header required)::

    patient_id,record_id,label,x_0_0,...,x_0_{d-1},x_1_0,...,x_{T-1}_{d-1}

Time-major flattening; missing entries are the literal ``NA``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from steadyrnn._util import (
    DataError,
    DegenerateFeatureError,
    ParameterError,
    ParseError,
    SchemaError,
    SplitTooSmallError,
    fmt_float,
)
from steadyrnn.linalg import Rng


MISSING_TOKEN = "NA"
ID_COLUMNS = ("patient_id", "record_id", "label")
_VALUE_COLUMN = re.compile(r"^x_(\d+)_(\d+)$")

# relative floor under which a training feature counts as constant
_DEGENERATE_STD = 1e-12

# split fractions are floored; this absorbs representation error like 20 * 0.15
_FLOOR_SLACK = 1e-9


#############################################################################
#############################################################################

### TYPES

def _frozen_array(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SequenceSample:
    """One fixed-length multivariate window.

    Attributes:
        patient_id: Patient the window came from.
        record_id: Identifier of the window.
        label: Class index.
        inputs: Values of shape ``(T, d)``; missing entries already imputed.
        mask: Optional ``(T, d)`` booleans, True where observed. None means
            fully observed.
    """

    patient_id: str
    record_id: str
    label: int
    inputs: NDArray[np.float64]
    mask: Optional[NDArray[np.bool_]] = None

    def __post_init__(self) -> None:
        inputs = _frozen_array(self.inputs, np.float64)
        if inputs.ndim != 2 or inputs.shape[0] < 2 or inputs.shape[1] < 1:
            raise SchemaError("sample {} needs inputs of shape (T >= 2, d >= 1), got {}".format(
                self.record_id, inputs.shape))
        if not np.all(np.isfinite(inputs)):
            raise DataError("sample {} has non-finite inputs".format(self.record_id))
        if int(self.label) < 0:
            raise ParameterError("sample {} has negative label {}".format(self.record_id, self.label))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "label", int(self.label))
        if self.mask is not None:
            mask = _frozen_array(self.mask, np.bool_)
            if mask.shape != inputs.shape:
                raise SchemaError("sample {} mask shape {} differs from inputs {}".format(
                    self.record_id, mask.shape, inputs.shape))
            object.__setattr__(self, "mask", mask)

    @property
    def length(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def observed(self) -> NDArray[np.bool_]:
        """Observation mask, all True when the sample has none."""
        if self.mask is None:
            return np.ones(self.inputs.shape, dtype=bool)
        return self.mask


@dataclass(frozen=True)
class NormStats:
    """Per-feature mean and population standard deviation."""

    mean: NDArray[np.float64]
    std: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", _frozen_array(self.mean, np.float64))
        object.__setattr__(self, "std", _frozen_array(self.std, np.float64))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise SchemaError("normalization mean {} and std {} disagree".format(self.mean.shape, self.std.shape))
        if np.any(self.std <= 0):
            raise DegenerateFeatureError("normalization std must be > 0")


@dataclass(frozen=True)
class Dataset:
    """A set of windows sharing ``(T, d)``.

    Attributes:
        samples: The windows, in a fixed order.
        num_classes: Number of classes C.
        input_dim: Feature width d.
        window_length: Steps per window T.
        normalization: Stats the values were standardized with, if any.
    """

    samples: tuple[SequenceSample, ...]
    num_classes: int
    input_dim: int
    window_length: int
    normalization: Optional[NormStats] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.num_classes < 2:
            raise ParameterError("num_classes must be >= 2, got {}".format(self.num_classes))
        for s in self.samples:
            if s.inputs.shape != (self.window_length, self.input_dim):
                raise SchemaError("sample {} has shape {}, dataset expects ({}, {})".format(
                    s.record_id, s.inputs.shape, self.window_length, self.input_dim))
            if s.label >= self.num_classes:
                raise SchemaError("sample {} has label {} >= num_classes {}".format(
                    s.record_id, s.label, self.num_classes))

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[SequenceSample]:
        return iter(self.samples)

    def inputs_array(self) -> NDArray[np.float64]:
        """All inputs stacked, shape ``(N, T, d)``."""
        if not self.samples:
            return np.zeros((0, self.window_length, self.input_dim))
        return np.stack([s.inputs for s in self.samples])

    def labels_array(self) -> NDArray[np.int64]:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def mask_array(self) -> NDArray[np.bool_]:
        if not self.samples:
            return np.zeros((0, self.window_length, self.input_dim), dtype=bool)
        return np.stack([s.observed for s in self.samples])

    def patients(self) -> list[str]:
        """Distinct patient ids, sorted."""
        return sorted({s.patient_id for s in self.samples})

    def class_counts(self) -> list[int]:
        counts = np.bincount(self.labels_array(), minlength=self.num_classes)
        return [int(c) for c in counts]

    def with_samples(self, samples: Iterable[SequenceSample]) -> Dataset:
        """Same metadata, different windows."""
        return replace(self, samples=tuple(samples))

    def select_patients(self, patient_ids: Iterable[str]) -> Dataset:
        """Windows of the given patients, original order kept."""
        keep = set(patient_ids)
        return self.with_samples(s for s in self.samples if s.patient_id in keep)


@dataclass(frozen=True)
class SplitSpec:
    """Patient-level split fractions and the shuffle seed."""

    train_frac: float = 0.7
    val_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ParameterError("split fractions must be positive, got {}".format(fracs))
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ParameterError("split fractions must sum to 1, got {}".format(sum(fracs)))


#############################################################################
#############################################################################

### IMPUTATION

def carry_forward(values: ArrayLike, mask: ArrayLike) -> NDArray[np.float64]:
    """
    Fill unobserved entries with the last observed value of their channel.

    Leading gaps take the first observed value; a channel with no
    observations at all becomes 0.0.
    """
    vals = np.array(values, dtype=np.float64)
    observed = np.asarray(mask, dtype=bool)
    steps = np.arange(vals.shape[0])
    for j in range(vals.shape[1]):
        seen = observed[:, j]
        if not seen.any():
            vals[:, j] = 0.0
            continue
        idx = np.maximum.accumulate(np.where(seen, steps, -1))
        idx[idx < 0] = int(np.argmax(seen))
        vals[:, j] = vals[idx, j]
    return vals


#############################################################################
#############################################################################

### SYNTHESIS

def class_template(label, num_classes, input_dim, window_length, amplitude=None, phase=None):
    """
    Deterministic base waveform of one class, shape ``(T, d)``.

    Each class mixes a sinusoid whose frequency grows with the class index
    and a localized spike whose position and sign depend on the class.
    ``amplitude`` and ``phase`` (per channel) apply a patient's morphology.
    """
    u = np.arange(window_length) / (window_length - 1)
    amp = np.ones(input_dim) if amplitude is None else np.asarray(amplitude, dtype=np.float64)
    shift = np.zeros(input_dim) if phase is None else np.asarray(phase, dtype=np.float64)
    center = (label + 1) / (num_classes + 1)
    sign = 1.0 if label % 2 == 0 else -1.0
    spike = 1.5 * sign * np.exp(-(((u - center) / 0.04) ** 2))
    out = np.empty((window_length, input_dim))
    for j in range(input_dim):
        freq = 1.0 + label + 0.5 * j
        wave = np.sin(2.0 * np.pi * freq * u + 0.5 * j + shift[j])
        out[:, j] = amp[j] * (wave + spike)
    return out


def synth_generate(rng: Rng, n_patients=20, sequences_per_patient=10, num_classes=3, input_dim=2,
                   window_length=64, noise_std=0.2, missing_frac=0.0) -> Dataset:
    """
    Seeded surrogate for annotated ECG windows.

    Labels go round-robin over the patient-major sample index, so every
    patient with at least ``num_classes`` windows contributes every class.
    Each patient draws an amplitude and phase jitter per channel once; each
    window adds Gaussian noise and masks entries at rate ``missing_frac``.
    Patients and windows draw from their own child streams of ``rng``.

    Raises:
        ParameterError: On out-of-range arguments.
    """
    if num_classes < 2 or window_length < 2 or input_dim < 1:
        raise ParameterError("need num_classes >= 2, window_length >= 2, input_dim >= 1")
    if n_patients < 1 or sequences_per_patient < 1:
        raise ParameterError("need n_patients >= 1 and sequences_per_patient >= 1")
    if noise_std < 0:
        raise ParameterError("noise_std must be >= 0, got {}".format(noise_std))
    if not 0 <= missing_frac < 1:
        raise ParameterError("missing_frac must be in [0, 1), got {}".format(missing_frac))

    shape = (window_length, input_dim)
    samples = []
    for p in range(n_patients):
        morph = rng.child(0, p)
        amplitude = 1.0 + 0.1 * morph.normal(input_dim)
        phase = 0.2 * morph.normal(input_dim)
        patient_id = "p{:03d}".format(p)
        for s in range(sequences_per_patient):
            label = (p * sequences_per_patient + s) % num_classes
            values = class_template(label, num_classes, input_dim, window_length, amplitude, phase)
            values = values + noise_std * rng.child(1, p, s).normal(shape)
            mask = None
            if missing_frac > 0:
                mask = rng.child(2, p, s).uniform(shape) >= missing_frac
                values = carry_forward(values, mask)
            samples.append(SequenceSample(
                patient_id=patient_id,
                record_id="{}-s{:03d}".format(patient_id, s),
                label=label,
                inputs=values,
                mask=mask,
            ))
    return Dataset(tuple(samples), num_classes, input_dim, window_length)


#############################################################################
#############################################################################

### CSV

def _parse_header(header, path):
    if tuple(header[:3]) != ID_COLUMNS:
        raise SchemaError("{}: header must start with {}".format(path, ",".join(ID_COLUMNS)))
    coords = []
    for name in header[3:]:
        match = _VALUE_COLUMN.match(name)
        if not match:
            raise SchemaError("{}: bad value column name '{}'".format(path, name))
        coords.append((int(match.group(1)), int(match.group(2))))
    if not coords:
        raise SchemaError("{}: header has no value columns".format(path))
    T = max(t for t, _ in coords) + 1
    d = max(j for _, j in coords) + 1
    expected = [(t, j) for t in range(T) for j in range(d)]
    if coords != expected:
        raise SchemaError("{}: value columns must be x_t_j in time-major order for T={}, d={}".format(path, T, d))
    if T < 2:
        raise SchemaError("{}: windows need at least 2 time steps".format(path))
    return T, d


def load_csv(path, num_classes: Optional[int] = None) -> Dataset:
    """
    Read windows from the flat CSV schema. No normalization is applied.

    Args:
        path: CSV file path.
        num_classes: Class count; defaults to ``max(label) + 1`` (at least 2).

    Raises:
        OSError: When the file cannot be read.
        SchemaError: On a bad header or rows that disagree on column count.
        ParseError: On an unparsable value, naming the line.
    """
    samples = []
    with open(path, newline="", encoding="utf-8-sig") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SchemaError("{}: file is empty".format(path))
        T, d = _parse_header(header, path)
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise SchemaError("{}: line {} has {} columns, header has {}".format(path, line, len(row), width))
            try:
                label = int(row[2])
            except ValueError:
                raise ParseError("{}: line {}: label '{}' is not an integer".format(path, line, row[2]), line=line)
            values = np.empty(T * d)
            observed = np.ones(T * d, dtype=bool)
            for col, text in enumerate(row[3:]):
                if text.strip() == MISSING_TOKEN:
                    observed[col] = False
                    values[col] = np.nan
                    continue
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError("{}: line {}: column {} value '{}' is not numeric".format(
                        path, line, header[col + 3], text), line=line)
                if not math.isfinite(value):
                    raise ParseError("{}: line {}: column {} is not finite".format(path, line, header[col + 3]), line=line)
                values[col] = value
            values = values.reshape(T, d)
            observed = observed.reshape(T, d)
            mask = None
            if not observed.all():
                values = carry_forward(values, observed)
                mask = observed
            try:
                samples.append(SequenceSample(row[0], row[1], label, values, mask))
            except ParameterError as e:
                raise ParseError("{}: line {}: {}".format(path, line, e), line=line)
    if not samples:
        raise SchemaError("{}: no data rows".format(path))
    top = max(s.label for s in samples) + 1
    classes = max(top, 2) if num_classes is None else num_classes
    if top > classes:
        raise SchemaError("{}: label {} exceeds num_classes {}".format(path, top - 1, classes))
    return Dataset(tuple(samples), classes, d, T)


def save_csv(dataset: Dataset, path) -> None:
    """Write windows in the CSV schema; masked entries become ``NA``."""
    T, d = dataset.window_length, dataset.input_dim
    header = list(ID_COLUMNS) + ["x_{}_{}".format(t, j) for t in range(T) for j in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for s in dataset.samples:
            observed = s.observed.reshape(-1)
            flat = s.inputs.reshape(-1)
            cells = [fmt_float(v) if seen else MISSING_TOKEN for v, seen in zip(flat, observed)]
            writer.writerow([s.patient_id, s.record_id, str(s.label)] + cells)


#############################################################################
#############################################################################

### NORMALIZATION

def fit_zscore(train: Dataset) -> NormStats:
    """
    Per-feature mean and population std over every training time step.

    Raises:
        ParameterError: When ``train`` is empty.
        DegenerateFeatureError: When a feature is constant, naming its index.
    """
    if len(train) == 0:
        raise ParameterError("cannot fit normalization on an empty training split")
    flat = train.inputs_array().reshape(-1, train.input_dim)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    for j in range(train.input_dim):
        if std[j] <= _DEGENERATE_STD * max(1.0, abs(mean[j])):
            raise DegenerateFeatureError("feature {} is constant over the training split".format(j), feature=j)
    return NormStats(mean=mean, std=std)


def apply_zscore(dataset: Dataset, stats: NormStats) -> Dataset:
    """Standardize every window with ``stats``; masks are kept."""
    if stats.mean.shape != (dataset.input_dim,):
        raise SchemaError("normalization has {} features, dataset has {}".format(stats.mean.shape[0], dataset.input_dim))
    samples = [
        replace(s, inputs=(s.inputs - stats.mean) / stats.std)
        for s in dataset.samples
    ]
    return replace(dataset, samples=tuple(samples), normalization=stats)


def zscore_fit_apply(train: Dataset, others: Sequence[Dataset] = ()) -> tuple[Dataset, list[Dataset], NormStats]:
    """Fit stats on ``train`` only and apply them to ``train`` and every other split."""
    stats = fit_zscore(train)
    return apply_zscore(train, stats), [apply_zscore(o, stats) for o in others], stats


#############################################################################
#############################################################################

### SPLITTING

def patient_split(dataset: Dataset, spec: SplitSpec = SplitSpec(),
                  require_all_classes=True) -> tuple[Dataset, Dataset, Dataset]:
    """
    Partition windows by patient into train, validation and test.

    Sorted patient ids are shuffled with ``spec.seed``; validation and test
    get ``floor(n · frac)`` patients each and train takes the remainder.

    Raises:
        SplitTooSmallError: With fewer than 3 patients, when a split would get
            no patients, or (``require_all_classes``) when a split misses a class.
    """
    patients = dataset.patients()
    n = len(patients)
    if n < 3:
        raise SplitTooSmallError("patient split needs at least 3 patients, got {}".format(n))
    n_val = int(math.floor(n * spec.val_frac + _FLOOR_SLACK))
    n_test = int(math.floor(n * spec.test_frac + _FLOOR_SLACK))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise SplitTooSmallError("split of {} patients gives {}/{}/{} patients".format(n, n_train, n_val, n_test))
    order = Rng(spec.seed).permutation(n)
    shuffled = [patients[i] for i in order]
    groups = (shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:])
    splits = tuple(dataset.select_patients(g) for g in groups)
    if require_all_classes:
        for name, split in zip(("train", "val", "test"), splits):
            missing = [c for c, count in enumerate(split.class_counts()) if count == 0]
            if missing:
                raise SplitTooSmallError("{} split has no samples of class(es) {}".format(name, missing))
    return splits


def subsample_patients(dataset: Dataset, frac: float, rng: Rng) -> Dataset:
    """
    Keep a seeded fraction of the patients (at least one).

    Used for the low-sample setting: applied to the training split only.
    """
    if not 0 < frac <= 1:
        raise ParameterError("patient fraction must be in (0, 1], got {}".format(frac))
    if frac == 1:
        return dataset
    patients = dataset.patients()
    keep = max(1, int(round(frac * len(patients))))
    order = rng.permutation(len(patients))
    return dataset.select_patients(patients[i] for i in order[:keep])


#############################################################################
#############################################################################

### CORRUPTION

def corrupt(dataset: Dataset, rng: Rng, noise_std=0.0, missing_frac=0.0) -> Dataset:
    """
    Add Gaussian noise to observed entries and mask more of them.

    Each window draws from its own child stream, so the result does not
    depend on processing order. Newly masked entries take the last observed
    (noisy) value. Labels and patient ids are untouched; with both rates
    zero the dataset is returned as is.

    Raises:
        ParameterError: When ``noise_std < 0`` or ``missing_frac`` is outside [0, 1).
    """
    if noise_std < 0:
        raise ParameterError("noise_std must be >= 0, got {}".format(noise_std))
    if not 0 <= missing_frac < 1:
        raise ParameterError("missing_frac must be in [0, 1), got {}".format(missing_frac))
    if noise_std == 0 and missing_frac == 0:
        return dataset
    shape = (dataset.window_length, dataset.input_dim)
    samples = []
    for index, s in enumerate(dataset.samples):
        stream = rng.child(index)
        observed = s.observed
        values = s.inputs + noise_std * stream.child(0).normal(shape) * observed
        mask = s.mask
        if missing_frac > 0:
            dropped = stream.child(1).uniform(shape) < missing_frac
            new_mask = observed & ~dropped
            values = carry_forward(values, new_mask)
            mask = None if (s.mask is None and new_mask.all()) else new_mask
        elif s.mask is not None:
            values = carry_forward(values, observed)
        samples.append(replace(s, inputs=values, mask=mask))
    return dataset.with_samples(samples)
