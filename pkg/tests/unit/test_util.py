"""
Unit tests for steadyrnn._util: error codes, fingerprints and float text.
"""

from __future__ import annotations

import pytest

from steadyrnn._util import (
    CHARSET,
    ConfigError,
    DataError,
    ModelFormatError,
    ParseError,
    SteadyError,
    TrainingDivergedError,
    base62_encode,
    error_code,
    fingerprint,
    fmt_float,
    hashify,
)


class TestErrorCodes:
    """
    Tests for the codes the CLI prints.
    """

    @pytest.mark.parametrize("exc, code", [
        (ConfigError("x"), "config"),
        (ParseError("x", line=3), "parse"),
        (ModelFormatError("x"), "model_format"),
        (TrainingDivergedError("x", epoch=2), "diverged"),
        (FileNotFoundError("x"), "io"),
        (KeyError("x"), "internal"),
    ])
    def test_codes(self, exc, code):
        assert error_code(exc) == code

    def test_errors_are_builtin_subclasses(self):
        """
        Errors stay catchable as the builtin they refine.

        Remove this test if: The error hierarchy stops mixing in builtins.
        """
        assert isinstance(DataError("x"), ValueError)
        assert isinstance(TrainingDivergedError("x"), RuntimeError)
        assert isinstance(ConfigError("x", key="seed"), SteadyError)
        assert ConfigError("x", key="seed").key == "seed"


class TestHashing:
    """
    Tests for deterministic run identifiers.
    """

    def test_hashify_is_stable_and_sized(self):
        assert hashify("abc") == hashify("abc")
        assert len(hashify("abc", length=10)) == 10

    def test_base62_digits_are_fixed_width(self):
        assert base62_encode(0, 3) == CHARSET[0] * 3
        assert base62_encode(62 + 5, 3) == CHARSET[0] + CHARSET[1] + CHARSET[5]
        assert set(hashify("abc")) <= set(CHARSET)

    def test_fingerprint_ignores_key_order(self):
        assert fingerprint({"a": 1, "b": [1, 2]}) == fingerprint({"b": [1, 2], "a": 1})
        assert fingerprint({"a": 1}) != fingerprint({"a": 2})
        assert len(fingerprint("x")) == 12


class TestFmtFloat:
    """
    Tests for the shared float text.
    """

    @pytest.mark.parametrize("value, text", [
        (0.1, "0.1"),
        (1.0, "1.0"),
        (1e-8, "1e-08"),
        (2, "2.0"),
        (float("nan"), "nan"),
        (float("inf"), "inf"),
        (float("-inf"), "-inf"),
    ])
    def test_text(self, value, text):
        assert fmt_float(value) == text

    def test_round_trips(self):
        value = 0.1 + 0.2
        assert float(fmt_float(value)) == value
