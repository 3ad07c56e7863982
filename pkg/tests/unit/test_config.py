"""
Unit tests for steadyrnn.config.
"""

from __future__ import annotations

import pytest

from steadyrnn._util import ConfigError
from steadyrnn.config import KEYS, RunConfig, describe_keys


class TestRunConfigParsing:
    """
    Tests for the ``key = value`` format.
    """

    def test_defaults(self):
        cfg = RunConfig()
        assert cfg["lambda"] == 0.0
        assert cfg["lambda_grid"] == (0.01, 0.05, 0.1)
        assert cfg["compare_models"] == ("lstm", "gru", "rc-gru")
        assert cfg["grad_clip_norm"] is None
        assert cfg.model_kind() == "gru"

    def test_comments_and_blank_lines(self):
        cfg = RunConfig.from_text("# noisy run\n\nseed = 3   # root seed\nlambda = 0.05\ncell = lstm\n")
        assert cfg["seed"] == 3
        assert cfg.model_kind() == "rc-lstm"

    def test_lists_and_none(self):
        cfg = RunConfig.from_text("lambda_grid = 0.2, 0.01\ncompare_models = gru, rc-gru\ngrad_clip_norm = 5\n")
        assert cfg["lambda_grid"] == (0.2, 0.01)
        assert cfg["compare_models"] == ("gru", "rc-gru")
        assert cfg["grad_clip_norm"] == 5.0
        assert RunConfig.from_text("grad_clip_norm = none\n")["grad_clip_norm"] is None

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_text("learning_rat = 0.1\n")
        assert excinfo.value.key == "learning_rat"

    def test_unparsable_value(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_text("max_epochs = many\n")
        assert excinfo.value.key == "max_epochs"

    def test_line_without_equals(self):
        with pytest.raises(ConfigError):
            RunConfig.from_text("seed 3\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_text("seed = 1\nseed = 2\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            RunConfig.from_file(tmp_path / "absent.cfg")

    def test_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("hidden_dim = 8\n", encoding="utf-8")
        assert RunConfig.from_file(path)["hidden_dim"] == 8


class TestRunConfigValidation:
    """
    Tests for range checks applied before any command runs.
    """

    @pytest.mark.parametrize("text, key", [
        ("lambda = -0.1", "lambda"),
        ("cell = rnn", "cell"),
        ("learning_rate = 0", "learning_rate"),
        ("patience = 0", "patience"),
        ("train_patient_frac = 1.5", "train_patient_frac"),
        ("compare_models = gru, mlp", "compare_models"),
        ("lambda_grid = 0.1, -0.1", "lambda_grid"),
        ("drift_split = everything", "drift_split"),
        ("train_frac = 0.8", "train_frac"),
        ("seed = 18446744073709551616", "seed"),
    ])
    def test_rejects(self, text, key):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_text(text + "\n")
        assert excinfo.value.key == key

    def test_seed_must_fit_in_64_bits(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig().with_overrides([], seed=2 ** 64)
        assert excinfo.value.key == "seed"
        assert RunConfig({"n_seeds": 1}).with_overrides([], seed=2 ** 64 - 1)["seed"] == 2 ** 64 - 1

    def test_compare_seeds_must_fit_in_64_bits(self):
        """Seeds seed .. seed + n_seeds - 1 all have to be valid."""
        with pytest.raises(ConfigError) as excinfo:
            RunConfig({"n_seeds": 2}).with_overrides([], seed=2 ** 64 - 1)
        assert excinfo.value.key == "seed"

    def test_unknown_key_in_dict(self):
        with pytest.raises(ConfigError):
            RunConfig({"nope": 1})


class TestRunConfigOverrides:
    """
    Tests for ``--set`` and ``--seed`` layering.
    """

    def test_later_wins(self):
        cfg = RunConfig.from_text("lambda = 0.05\nseed = 2\n").with_overrides(["lambda=0.1", "max_epochs = 20"], seed=9)
        assert cfg["lambda"] == 0.1
        assert cfg["max_epochs"] == 20
        assert cfg["seed"] == 9

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(["lambda"])

    def test_derived_objects(self):
        cfg = RunConfig().with_overrides(["lambda=0.05", "hidden_dim=8", "val_frac=0.2", "train_frac=0.65"])
        tc = cfg.train_config(seed=5)
        assert (tc.lam, tc.hidden_dim, tc.seed) == (0.05, 8, 5)
        spec = cfg.split_spec()
        assert (spec.train_frac, spec.val_frac, spec.seed) == (0.65, 0.2, 0)
        assert cfg.synth_kwargs()["n_patients"] == 20


class TestRunConfigExport:
    """
    Tests for config text and run ids.
    """

    def test_text_reads_back(self):
        cfg = RunConfig().with_overrides(["lambda_grid=0.2,0.3", "grad_clip_norm=1.5", "cell=lstm"])
        assert RunConfig.from_text(cfg.to_text()) == cfg

    def test_text_lists_every_key(self):
        lines = RunConfig().to_text().splitlines()
        assert [line.split(" = ")[0] for line in lines] == list(KEYS)

    def test_fingerprint(self):
        assert RunConfig().fingerprint() == RunConfig().fingerprint()
        assert RunConfig().fingerprint() != RunConfig({"seed": 1}).fingerprint()

    def test_describe_keys(self):
        text = describe_keys()
        for name in KEYS:
            assert name in text
