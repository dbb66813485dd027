"""SVG rendering of pen trajectories: one polyline per pen-down stroke."""

from __future__ import annotations

import numpy as np

from .errors import EmptyTrajectory
from .trajectory import TextLine, line_absolute, stroke_slices

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


def line_strokes(line: TextLine) -> list[np.ndarray]:
    """Absolute (x, y) polylines of every stroke, glyph boundaries included."""
    pts = line_absolute(line)
    strokes = []
    offset = 0
    for g in line.glyphs:
        seg = pts[offset : offset + len(g)]
        offset += len(g)
        for sl in stroke_slices(seg):
            strokes.append(seg[sl, :2])
    return strokes


def render_svg(line: TextLine, color_per_stroke: bool = False, stroke_width: float | None = None) -> str:
    """Render a line as SVG; the viewBox fits all ink with a 5% margin."""
    strokes = line_strokes(line)
    if not strokes:
        raise EmptyTrajectory("no ink to render")
    all_pts = np.concatenate(strokes, axis=0)
    min_x, min_y = all_pts.min(axis=0)
    max_x, max_y = all_pts.max(axis=0)
    w = max(max_x - min_x, 1e-9)
    h = max(max_y - min_y, 1e-9)
    mx, my = 0.05 * w, 0.05 * h
    if stroke_width is None:
        stroke_width = 0.01 * max(w, h)
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{min_x - mx:.6f} {min_y - my:.6f} {w + 2 * mx:.6f} {h + 2 * my:.6f}">'
    ]
    for i, stroke in enumerate(strokes):
        color = PALETTE[i % len(PALETTE)] if color_per_stroke else "#000000"
        pts = " ".join(f"{x:.6f},{y:.6f}" for x, y in stroke)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{stroke_width:.6f}" stroke-linecap="round" stroke-linejoin="round"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
