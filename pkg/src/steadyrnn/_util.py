"""
Internal utilities for SteadyRNN.

This module contains the error hierarchy, deterministic hashing used for run
identifiers, and the float formatting every text artifact shares.
"""

from __future__ import annotations

#############################################################################
#############################################################################

### IMPORTS AND SETTINGS

import json
import hashlib
from typing import Any


#############################################################################
#############################################################################

### ERRORS

class SteadyError(Exception):
    """
    Mixin for every error SteadyRNN raises on purpose.

    Each subclass also derives from the closest builtin so callers can catch
    ``ValueError`` and friends as usual. ``code`` is the stable token the CLI
    prints in its single-line error output.
    """

    code = "error"


class ShapeError(SteadyError, ValueError):
    """Raised when array dimensions disagree."""

    code = "shape"


class DataError(SteadyError, ValueError):
    """Raised when inputs contain non-finite values."""

    code = "data"


class ParameterError(SteadyError, ValueError):
    """Raised when a numeric parameter is outside its allowed range."""

    code = "parameter"


class SequenceTooShortError(SteadyError, ValueError):
    """Raised when an operation needs at least two time steps."""

    code = "sequence_too_short"


class ParseError(SteadyError, ValueError):
    """Raised when a data file row cannot be parsed."""

    code = "parse"

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class SchemaError(SteadyError, ValueError):
    """Raised when a data file disagrees with the CSV schema."""

    code = "schema"


class DegenerateFeatureError(SteadyError, ValueError):
    """Raised when a feature is constant over the training split."""

    code = "degenerate_feature"

    def __init__(self, message, feature=None):
        super().__init__(message)
        self.feature = feature


class SplitTooSmallError(SteadyError, ValueError):
    """Raised when a patient-level split would come out empty."""

    code = "split_too_small"


class TrainingDivergedError(SteadyError, RuntimeError):
    """Raised when a loss becomes non-finite during training."""

    code = "diverged"

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(SteadyError, ValueError):
    """Raised when a run configuration key or value is invalid."""

    code = "config"

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ModelFormatError(SteadyError, ValueError):
    """Raised when a model file cannot be decoded."""

    code = "model_format"


def error_code(exc):
    """Return the CLI error code for an exception."""
    if isinstance(exc, SteadyError):
        return exc.code
    if isinstance(exc, OSError):
        return "io"
    return "internal"


#############################################################################
#############################################################################

### HASHING

CHARSET = '0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz'


def sha256_int(input_string):
    """Generate a SHA-256 hash and return it as an integer."""
    hash_bytes = hashlib.sha256(input_string.encode("utf-8")).digest()
    return int.from_bytes(hash_bytes, byteorder="big")


def base62_encode(number, length):
    """Encode an integer into a fixed-length Base62 string."""
    base = len(CHARSET)
    encoded = []
    for _ in range(length):
        number, remainder = divmod(number, base)
        encoded.append(CHARSET[remainder])
    return ''.join(encoded[::-1])



def hashify(input_string, length=32):
    """Generate a deterministic Base62 hash of a string."""
    return base62_encode(sha256_int(input_string), length)


def fingerprint(payload: Any, length=12) -> str:
    """
    Deterministic short hash of any JSON-serializable payload.

    Keys are sorted so two equal configurations always share a fingerprint.
    Used as the run id in metadata lines and RUNLOG traces.
    """
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'), default=str)
    return hashify(canonical, length)


#############################################################################
#############################################################################

### FORMATTING

def fmt_float(value):
    """
    Shortest round-trip text for a float.

    ``repr`` is stable across platforms for IEEE doubles, which keeps every
    CSV and text artifact byte-reproducible.
    """
    value = float(value)
    if value != value:
        return "nan"
    if value in (float("inf"), float("-inf")):
        return "inf" if value > 0 else "-inf"
    return repr(value)
