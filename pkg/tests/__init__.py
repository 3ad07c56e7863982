"""
SteadyRNN test suite.

Tests are organized into:
- unit/: Pure deterministic tests on small models and datasets
- integration/: End-to-end training experiments (behind an env flag)
"""
