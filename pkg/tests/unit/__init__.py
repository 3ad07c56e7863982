"""
Unit tests for SteadyRNN.

Unit tests are:
- Pure and deterministic
- Train only tiny models on tiny synthetic data
- Run on every PR
- Fast (typically <1s each)
"""
