"""
Unit tests for steadyrnn.plot.
"""

from __future__ import annotations

import pytest

from steadyrnn._util import ParameterError
from steadyrnn.diagnostics import drift_report
from steadyrnn.linalg import Rng
from steadyrnn.plot import drift_svg


def _reports(count):
    return [drift_report(Rng(i).normal((10, 3)), Rng(i + 100).normal((10, 2)), lam=0.1) for i in range(count)]


class TestDriftSvg:
    """
    Tests for the drift chart.
    """

    def test_one_polyline_per_report(self):
        svg = drift_svg(_reports(3))
        assert svg.startswith("<svg ")
        assert svg.endswith("</svg>\n")
        assert svg.count("<polyline") == 3

    def test_points_per_step(self):
        svg = drift_svg(_reports(1), width=300, height=200)
        points = svg.split('points="')[1].split('"')[0].split()
        assert len(points) == 9
        assert 'width="300"' in svg

    def test_identical_reports_identical_text(self):
        assert drift_svg(_reports(2)) == drift_svg(_reports(2))

    def test_labels_are_escaped(self):
        svg = drift_svg(_reports(1), labels=["a<b"], title="x & y")
        assert "a&lt;b" in svg
        assert "x &amp; y" in svg

    def test_flat_trajectory_draws(self):
        flat = drift_report([[1.0]] * 4, [[0.0], [1.0], [2.0], [3.0]], lam=0.1)
        assert "<polyline" in drift_svg([flat])

    def test_empty_raises(self):
        with pytest.raises(ParameterError):
            drift_svg([])
