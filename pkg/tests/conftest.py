"""
Pytest configuration and shared fixtures for SteadyRNN tests.

This module provides shared test fixtures and configuration for the entire
test suite. All fixtures defined here are available to all test files
without explicit import.
"""

from __future__ import annotations

import numpy as np
import pytest

from steadyrnn import CellParams, Rng, SplitSpec, patient_split, synth_generate, zscore_fit_apply


# ============================================================================
# Markers
# ============================================================================


def pytest_configure(config: pytest.Config) -> None:
    """Configure custom pytest markers."""
    config.addinivalue_line(
        "markers",
        "integration: marks end-to-end tests that train real models",
    )
    config.addinivalue_line(
        "markers",
        "slow: marks tests as slow-running",
    )


# ============================================================================
# Finite differences
# ============================================================================


FD_STEP = 1e-5
FD_RTOL = 1e-4
FD_ATOL = 1e-7


def numeric_gradient(fn, params: CellParams, step=FD_STEP):
    """
    Central finite differences of a scalar ``fn(params)`` for every coordinate.

    Returns:
        Dict of block name to an array shaped like the block.
    """
    grads = {}
    for name, block in params.arrays.items():
        out = np.zeros_like(block)
        for idx in np.ndindex(block.shape):
            plus = params.copy()
            minus = params.copy()
            plus.arrays[name][idx] += step
            minus.arrays[name][idx] -= step
            out[idx] = (fn(plus) - fn(minus)) / (2.0 * step)
        grads[name] = out
    return grads


def assert_gradients_close(analytic, numeric, rtol=FD_RTOL, atol=FD_ATOL):
    """Every coordinate within ``rtol`` relative or ``atol`` absolute."""
    for name, expected in numeric.items():
        np.testing.assert_allclose(analytic[name], expected, rtol=rtol, atol=atol, err_msg=name)


@pytest.fixture
def numeric_grad():
    """
    Factory fixture returning the finite-difference helper.

    Example:
        def test_something(numeric_grad):
            expected = numeric_grad(lambda p: loss(p), params)
    """
    return numeric_gradient


@pytest.fixture
def grads_close():
    """The coordinate-wise gradient comparison helper."""
    return assert_gradients_close


# ============================================================================
# Parameter Fixtures
# ============================================================================


@pytest.fixture
def gru_params():
    """
    Small random GRU (d=2, k=3, C=2) seeded at 3.

    Returns:
        CellParams for a GRU cell.
    """
    return CellParams.init("gru", input_dim=2, hidden_dim=3, num_classes=2, rng=Rng(3))


@pytest.fixture
def lstm_params():
    """Small random LSTM (d=2, k=3, C=2) seeded at 3."""
    return CellParams.init("lstm", input_dim=2, hidden_dim=3, num_classes=2, rng=Rng(3))


@pytest.fixture(params=["gru", "lstm"])
def cell_kind(request):
    """Both cell kinds, for tests that hold for either."""
    return request.param


# ============================================================================
# Data Fixtures
# ============================================================================


@pytest.fixture
def tiny_dataset():
    """
    Small synthetic dataset: 10 patients × 6 windows, C=3, d=2, T=12.

    Large enough for a 70/15/15 patient split with every class present in
    every split, small enough for sub-second training.
    """
    return synth_generate(Rng(0), n_patients=10, sequences_per_patient=6, num_classes=3,
                          input_dim=2, window_length=12, noise_std=0.1)


@pytest.fixture
def tiny_splits(tiny_dataset):
    """Normalized (train, val, test) of ``tiny_dataset``."""
    train, val, test = patient_split(tiny_dataset, SplitSpec(seed=0))
    train_n, (val_n, test_n), _ = zscore_fit_apply(train, [val, test])
    return train_n, val_n, test_n


@pytest.fixture
def default_dataset():
    """The default synthetic benchmark (20 patients × 10 windows, C=3, d=2, T=64)."""
    return synth_generate(Rng(0))
