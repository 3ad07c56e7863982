"""
Drift-versus-time chart as a standalone SVG document.

Pure text: one polyline per sequence over shared axes, coordinates printed
with two decimals so identical reports give identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from steadyrnn._util import ParameterError
from steadyrnn.diagnostics import DriftReport


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

_MARGIN_LEFT = 56
_MARGIN_RIGHT = 16
_MARGIN_TOP = 28
_MARGIN_BOTTOM = 40


def drift_svg(reports: list[DriftReport], width=640, height=320, title="Hidden-state drift per step",
              labels=None) -> str:
    """
    Render ``‖h_t − h_{t−1}‖`` against t for each report.

    Args:
        reports: One report per sequence; all share T.
        width, height: Canvas size in pixels.
        title: Chart title.
        labels: Optional legend text per report.

    Raises:
        ParameterError: On an empty list.
    """
    if not reports:
        raise ParameterError("drift_svg needs at least one report")
    labels = list(labels) if labels is not None else ["seq {}".format(i) for i in range(len(reports))]
    steps = max(len(r.per_step_drift) for r in reports)
    top = max(max(r.per_step_drift) for r in reports)
    top = top if top > 0 else 1.0
    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def x_at(index):
        return _MARGIN_LEFT + (plot_w * index / (steps - 1) if steps > 1 else plot_w / 2)

    def y_at(value):
        return _MARGIN_TOP + plot_h * (1.0 - value / top)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'.format(w=width, h=height),
        '<rect x="0" y="0" width="{}" height="{}" fill="white"/>'.format(width, height),
        '<text x="{:.2f}" y="18" font-size="13" text-anchor="middle">{}</text>'.format(width / 2, escape(title)),
        # axes
        '<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>'.format(_MARGIN_LEFT, _MARGIN_TOP, _MARGIN_TOP + plot_h),
        '<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>'.format(_MARGIN_LEFT, _MARGIN_TOP + plot_h, _MARGIN_LEFT + plot_w),
        '<text x="{:.2f}" y="{}" font-size="11" text-anchor="middle">t</text>'.format(_MARGIN_LEFT + plot_w / 2, height - 8),
        '<text x="{}" y="{:.2f}" font-size="11" text-anchor="end">{:.3g}</text>'.format(_MARGIN_LEFT - 4, y_at(top) + 4, top),
        '<text x="{}" y="{:.2f}" font-size="11" text-anchor="end">0</text>'.format(_MARGIN_LEFT - 4, y_at(0.0) + 4),
        '<text x="{}" y="{}" font-size="11">2</text>'.format(_MARGIN_LEFT, _MARGIN_TOP + plot_h + 14),
        '<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>'.format(
            _MARGIN_LEFT + plot_w, _MARGIN_TOP + plot_h + 14, steps + 1),
    ]
    for i, report in enumerate(reports):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join("{:.2f},{:.2f}".format(x_at(j), y_at(v)) for j, v in enumerate(report.per_step_drift))
        parts.append('<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>'.format(color, points))
        parts.append('<text x="{}" y="{}" font-size="11" fill="{}" text-anchor="end">{}</text>'.format(
            _MARGIN_LEFT + plot_w, _MARGIN_TOP + 12 + 13 * i, color, escape(labels[i])))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
