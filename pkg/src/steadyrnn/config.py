"""
Run configuration for the SteadyRNN command line.

A RunConfig is a flat ``key = value`` mapping over every synthesis, split,
training, corruption and drift setting. Files look like::

    # noisy low-sample run
    seed = 3
    lambda = 0.05
    train_patient_frac = 0.5

Values come from the defaults, then the file, then ``--set key=value`` flags
and ``--seed`` (later wins). Unknown keys and bad values raise ConfigError
naming the key, and the whole configuration is validated before any
command starts work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional

from steadyrnn._util import ConfigError, SteadyError, fingerprint, fmt_float
from steadyrnn.data import SplitSpec
from steadyrnn.train import MODEL_KINDS, TrainConfig


#############################################################################
#############################################################################

### KEY REGISTRY

def _to_optional_float(text):
    if text.lower() in ("none", ""):
        return None
    return float(text)


def _to_float_list(text):
    return tuple(float(part) for part in text.split(",") if part.strip())


def _to_name_list(text):
    return tuple(part.strip() for part in text.split(",") if part.strip())


@dataclass(frozen=True)
class ConfigKey:
    """Type, default and one-line doc of a configuration key."""

    parse: Callable[[str], Any]
    default: Any
    doc: str
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""


_positive = (lambda v: v > 0, "must be > 0")
_at_least_one = (lambda v: v >= 1, "must be >= 1")
_non_negative = (lambda v: v >= 0, "must be >= 0")
_rate = (lambda v: 0 <= v < 1, "must be in [0, 1)")


def _key(parse, default, doc, rule=None):
    check, text = rule if rule is not None else (None, "")
    return ConfigKey(parse=parse, default=default, doc=doc, check=check, rule=text)


KEYS: dict[str, ConfigKey] = {
    # synthesis
    "seed": _key(int, 0, "Root seed for synthesis, splits, initialization and shuffling.",
                 (lambda v: 0 <= v < 2 ** 64, "must be in [0, 2**64)")),
    "n_patients": _key(int, 20, "Synthetic patients.", _at_least_one),
    "sequences_per_patient": _key(int, 10, "Synthetic windows per patient.", _at_least_one),
    "num_classes": _key(int, 3, "Number of classes C.", (lambda v: v >= 2, "must be >= 2")),
    "input_dim": _key(int, 2, "Feature width d.", _at_least_one),
    "window_length": _key(int, 64, "Steps per window T.", (lambda v: v >= 2, "must be >= 2")),
    "noise_std": _key(float, 0.2, "Sensor noise of synthetic windows.", _non_negative),
    "missing_frac": _key(float, 0.0, "Fraction of synthetic entries masked as missing.", _rate),
    # split
    "train_frac": _key(float, 0.7, "Fraction of patients for training.", _positive),
    "val_frac": _key(float, 0.15, "Fraction of patients for validation.", _positive),
    "test_frac": _key(float, 0.15, "Fraction of patients for testing.", _positive),
    "train_patient_frac": _key(float, 1.0, "Fraction of training patients kept (low-sample setting).",
                               (lambda v: 0 < v <= 1, "must be in (0, 1]")),
    # model and optimizer
    "cell": _key(str, "gru", "Cell kind: gru or lstm. lambda > 0 turns on the consistency term.",
                 (lambda v: v in ("gru", "lstm"), "must be gru or lstm")),
    "lambda": _key(float, 0.0, "Consistency weight.", _non_negative),
    "learning_rate": _key(float, 0.001, "Adam step size.", _positive),
    "batch_size": _key(int, 64, "Windows per mini-batch.", _at_least_one),
    "hidden_dim": _key(int, 32, "Hidden width k (128 for the full protocol).", _at_least_one),
    "max_epochs": _key(int, 100, "Epoch cap.", _at_least_one),
    "patience": _key(int, 10, "Epochs without validation improvement before stopping.", _at_least_one),
    "adam_beta1": _key(float, 0.9, "Adam first-moment decay.", (lambda v: 0 < v < 1, "must be in (0, 1)")),
    "adam_beta2": _key(float, 0.999, "Adam second-moment decay.", (lambda v: 0 < v < 1, "must be in (0, 1)")),
    "adam_epsilon": _key(float, 1e-8, "Adam denominator guard.", _positive),
    "grad_clip_norm": _key(_to_optional_float, None, "Global gradient-norm clip, or none.",
                           (lambda v: v is None or v > 0, "must be > 0 or none")),
    # sweep and comparison
    "lambda_grid": _key(_to_float_list, (0.01, 0.05, 0.1), "Comma-separated lambda values for sweeps.",
                        (lambda v: len(v) > 0 and all(x >= 0 for x in v), "must be nonempty, all >= 0")),
    "n_seeds": _key(int, 5, "Seeds per model in compare.", _at_least_one),
    "compare_models": _key(_to_name_list, ("lstm", "gru", "rc-gru"), "Comma-separated model kinds for compare.",
                           (lambda v: len(v) > 0 and all(m in MODEL_KINDS for m in v),
                            "must name models among {}".format(", ".join(sorted(MODEL_KINDS))))),
    "test_noise_std": _key(float, 0.3, "Gaussian noise added to the test split in compare.", _non_negative),
    "test_missing_frac": _key(float, 0.0, "Extra missingness added to the test split in compare.", _rate),
    # drift
    "drift_epsilon": _key(float, 1e-8, "Denominator guard of the drift ratio.", _positive),
    "drift_threshold": _key(float, 10.0, "Ratio above which a step counts as drifting.", _positive),
    "drift_sequences": _key(int, 5, "Sequences drawn in drift.svg.", _non_negative),
    "drift_split": _key(str, "test", "Split drift reports use when the data is split: train, val, test or all.",
                        (lambda v: v in ("train", "val", "test", "all"), "must be train, val, test or all")),
}


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return fmt_float(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


#############################################################################
#############################################################################

### RUN CONFIG

class RunConfig:
    """
    Validated flat configuration for one CLI command.

    Example:
        >>> cfg = RunConfig.from_text("lambda = 0.05\\nseed = 2\\n")
        >>> cfg = cfg.with_overrides(["max_epochs=20"])
        >>> cfg["lambda"], cfg.model_kind()
        (0.05, 'rc-gru')
        >>> cfg.train_config().learning_rate
        0.001
    """

    def __init__(self, values: Optional[dict[str, Any]] = None):
        merged = {name: key.default for name, key in KEYS.items()}
        for name, value in (values or {}).items():
            if name not in KEYS:
                raise ConfigError("unknown configuration key '{}'".format(name), key=name)
            merged[name] = value
        self.values = merged
        self.validate()

    #--- Construction ---

    @staticmethod
    def _coerce(name, text):
        if name not in KEYS:
            raise ConfigError("unknown configuration key '{}'".format(name), key=name)
        try:
            return KEYS[name].parse(text.strip())
        except ValueError:
            raise ConfigError("{}: cannot parse '{}'".format(name, text.strip()), key=name) from None

    @classmethod
    def parse_lines(cls, lines: Iterable[str]) -> dict[str, Any]:
        """``key = value`` lines to a dict of typed values."""
        values: dict[str, Any] = {}
        for number, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("line {}: expected 'key = value', got '{}'".format(number, line))
            name, text = (part.strip() for part in line.split("=", 1))
            if name in values:
                raise ConfigError("line {}: key '{}' given twice".format(number, name), key=name)
            values[name] = cls._coerce(name, text)
        return values

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        return cls(cls.parse_lines(text.splitlines()))

    @classmethod
    def from_file(cls, path) -> RunConfig:
        """Read a config file; a missing file raises the builtin OSError."""
        with open(path, encoding="utf-8") as f:
            return cls(cls.parse_lines(f))

    def with_overrides(self, assignments: Iterable[str] = (), seed: Optional[int] = None) -> RunConfig:
        """New config with ``key=value`` overrides and an optional seed applied."""
        values = dict(self.values)
        for item in assignments:
            if "=" not in item:
                raise ConfigError("override '{}' is not key=value".format(item))
            name, text = item.split("=", 1)
            values[name.strip()] = self._coerce(name.strip(), text)
        if seed is not None:
            values["seed"] = int(seed)
        return RunConfig(values)

    #--- Validation ---

    def validate(self) -> None:
        """
        Check every key, then build the TrainConfig and SplitSpec it implies.

        Raises:
            ConfigError: Naming the first offending key.
        """
        for name, key in KEYS.items():
            value = self.values[name]
            if key.check is not None and not key.check(value):
                raise ConfigError("{} {}, got {}".format(name, key.rule, _format(value)), key=name)
        # compare runs seeds seed .. seed + n_seeds - 1
        if self.values["seed"] + self.values["n_seeds"] - 1 >= 2 ** 64:
            raise ConfigError("seed + n_seeds - 1 must be < 2**64, got seed {}".format(self.values["seed"]),
                              key="seed")
        try:
            self.split_spec()
        except SteadyError as e:
            raise ConfigError("train_frac/val_frac/test_frac: {}".format(e), key="train_frac") from e
        try:
            self.train_config()
        except SteadyError as e:
            raise ConfigError("training settings: {}".format(e), key="learning_rate") from e

    #--- Accessors ---

    def __getitem__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise ConfigError("unknown configuration key '{}'".format(name), key=name) from None

    def model_kind(self) -> str:
        """Model kind for ``train``: the cell, regularized when λ > 0."""
        cell = self.values["cell"]
        return "rc-" + cell if self.values["lambda"] > 0 else cell

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        v = self.values
        return TrainConfig(
            learning_rate=v["learning_rate"],
            batch_size=v["batch_size"],
            lam=v["lambda"],
            hidden_dim=v["hidden_dim"],
            max_epochs=v["max_epochs"],
            patience=v["patience"],
            seed=v["seed"] if seed is None else seed,
            adam_beta1=v["adam_beta1"],
            adam_beta2=v["adam_beta2"],
            adam_epsilon=v["adam_epsilon"],
            grad_clip_norm=v["grad_clip_norm"],
        )

    def split_spec(self, seed: Optional[int] = None) -> SplitSpec:
        v = self.values
        return SplitSpec(
            train_frac=v["train_frac"],
            val_frac=v["val_frac"],
            test_frac=v["test_frac"],
            seed=v["seed"] if seed is None else seed,
        )

    def synth_kwargs(self) -> dict[str, Any]:
        """Keyword arguments for ``synth_generate``."""
        keys = ("n_patients", "sequences_per_patient", "num_classes", "input_dim",
                "window_length", "noise_std", "missing_frac")
        return {k: self.values[k] for k in keys}

    #--- Export ---

    def to_dict(self) -> dict[str, Any]:
        return dict(self.values)

    def to_text(self) -> str:
        """Every key in registry order, in the file format."""
        return "".join("{} = {}\n".format(name, _format(self.values[name])) for name in KEYS)

    def fingerprint(self) -> str:
        """Deterministic run id for this configuration."""
        return fingerprint(self.to_text())

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def __repr__(self):
        return "RunConfig(id={})".format(self.fingerprint())


def describe_keys() -> str:
    """One line per key: name, default and doc."""
    return "".join("{:<22} {:<18} {}\n".format(name, _format(key.default), key.doc) for name, key in KEYS.items())
