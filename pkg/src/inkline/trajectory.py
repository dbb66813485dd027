"""Pen-trajectory data model and preprocessing.

A trajectory is a sequence of (dh, dv, s) triples: horizontal movement,
vertical movement and pen state. ``s = +1`` means the pen touches the
surface at that point, ``s = -1`` means it is lifted (travel move).
Absolute positions are the cumulative sums of the deltas.

A text line is a chained trajectory: the first delta of glyph ``i``
continues from the last absolute point of glyph ``i - 1``. After
preprocessing, glyphs are decoupled (each height-normalized in its own
frame) and the line geometry lives in an explicit :class:`Layout`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateExtent, EmptyTrajectory, InvalidValue, ShapeMismatch


class PenPoint(NamedTuple):
    dh: float
    dv: float
    s: float


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ShapeMismatch(f"expected (n, 3) trajectory, got shape {arr.shape}")
    return arr


@dataclass
class Glyph:
    """One character's trajectory plus its category id."""

    points: np.ndarray  # (n, 3) float64 of (dh, dv, s)
    category: int = 0

    def __post_init__(self):
        self.points = _as_points(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def copy(self) -> "Glyph":
        return Glyph(self.points.copy(), self.category)


@dataclass
class TextLine:
    """A sequence of glyphs with writer id and transcript (category ids)."""

    glyphs: list[Glyph]
    writer: str = ""
    transcript: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.transcript:
            self.transcript = [g.category for g in self.glyphs]
        if len(self.transcript) != len(self.glyphs):
            raise ShapeMismatch("transcript length must equal glyph count")
        for t, g in zip(self.transcript, self.glyphs):
            if t != g.category:
                raise ShapeMismatch("transcript disagrees with glyph categories")


@dataclass
class BoundingBox:
    """Glyph box: height, width, vertical center, and horizontal offset.

    ``dx`` is the offset of this box's left edge from the previous box's
    right edge (negative for overlap); for the first box it is the left
    edge relative to the line origin x = 0.
    """

    height: float
    width: float
    cy: float
    dx: float

    def as_array(self) -> np.ndarray:
        return np.array([self.height, self.width, self.cy, self.dx], dtype=np.float64)

    @staticmethod
    def from_array(v) -> "BoundingBox":
        h, w, cy, dx = (float(x) for x in v)
        return BoundingBox(h, w, cy, dx)


@dataclass
class Layout:
    """Per-line sequence of bounding boxes."""

    boxes: list[BoundingBox]

    def __len__(self) -> int:
        return len(self.boxes)

    def as_array(self) -> np.ndarray:
        return np.stack([b.as_array() for b in self.boxes]) if self.boxes else np.zeros((0, 4))

    @staticmethod
    def from_array(arr) -> "Layout":
        return Layout([BoundingBox.from_array(row) for row in np.asarray(arr, dtype=np.float64)])


def to_absolute(glyph: Glyph | np.ndarray) -> np.ndarray:
    """Cumulative-sum a delta trajectory into absolute (x, y, s) points."""
    pts = glyph.points if isinstance(glyph, Glyph) else _as_points(glyph)
    if len(pts) == 0:
        raise EmptyTrajectory("cannot convert an empty trajectory")
    out = pts.copy()
    out[:, 0] = np.cumsum(pts[:, 0])
    out[:, 1] = np.cumsum(pts[:, 1])
    return out


def to_relative(absolute_points) -> np.ndarray:
    """Difference absolute (x, y, s) points back into (dh, dv, s) deltas.

    The first point's deltas equal its absolute coordinates, so
    ``to_absolute(to_relative(p)) == p``.
    """
    pts = _as_points(absolute_points)
    if len(pts) == 0:
        raise EmptyTrajectory("cannot convert an empty trajectory")
    out = pts.copy()
    out[1:, 0] = np.diff(pts[:, 0])
    out[1:, 1] = np.diff(pts[:, 1])
    return out


def binarize_pen_state(value: float) -> float:
    """Threshold a noisy pen state at 0; exact zero maps to pen-up (-1)."""
    if not math.isfinite(value):
        raise InvalidValue(f"pen state must be finite, got {value}")
    return 1.0 if value > 0 else -1.0


def ink_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of pen-down points (s > 0)."""
    return points[:, 2] > 0


def stroke_slices(points: np.ndarray) -> list[slice]:
    """Index ranges of the maximal pen-down runs (one per visible stroke)."""
    down = ink_mask(points)
    slices = []
    start = None
    for i, d in enumerate(down):
        if d and start is None:
            start = i
        elif not d and start is not None:
            slices.append(slice(start, i))
            start = None
    if start is not None:
        slices.append(slice(start, len(points)))
    return slices


def ink_extents(points_abs: np.ndarray) -> tuple[float, float, float, float]:
    """(min_x, min_y, max_x, max_y) over the pen-down points of an absolute trajectory."""
    mask = ink_mask(points_abs)
    if not mask.any():
        raise EmptyTrajectory("trajectory has no ink (no pen-down points)")
    xs = points_abs[mask, 0]
    ys = points_abs[mask, 1]
    return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())


def _point_segment_line_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Perpendicular distance of each point to the line through a-b (point distance if a == b)."""
    d = b - a
    norm = math.hypot(d[0], d[1])
    if norm == 0.0:
        return np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1])
    cross = np.abs(d[0] * (a[1] - pts[:, 1]) - (a[0] - pts[:, 0]) * d[1])
    return cross / norm


def _rdp_keep_mask(xy: np.ndarray, epsilon: float) -> np.ndarray:
    """Iterative Ramer-Douglas-Peucker on one polyline; returns kept-point mask."""
    n = len(xy)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        interior = xy[lo + 1 : hi]
        dists = _point_segment_line_distance(interior, xy[lo], xy[hi])
        idx = int(np.argmax(dists))
        if dists[idx] > epsilon:
            mid = lo + 1 + idx
            keep[mid] = True
            stack.append((lo, mid))
            stack.append((mid, hi))
    return keep


def rdp_simplify(glyph: Glyph, epsilon: float) -> Glyph:
    """Simplify each pen-down stroke with RDP at tolerance ``epsilon``.

    Operates on absolute coordinates; stroke endpoints and all pen-up
    travel points are always retained, so the pen-state pattern and the
    chaining of the last point are preserved.
    """
    if epsilon < 0:
        raise InvalidValue(f"epsilon must be >= 0, got {epsilon}")
    pts_abs = to_absolute(glyph)
    keep = np.ones(len(pts_abs), dtype=bool)
    for sl in stroke_slices(pts_abs):
        if sl.stop - sl.start >= 3:
            keep[sl] = _rdp_keep_mask(pts_abs[sl, :2], epsilon)
    simplified = to_relative(pts_abs[keep])
    return Glyph(simplified, glyph.category)


def normalize_height(glyph: Glyph, fallback_to_width: bool = False) -> Glyph:
    """Uniformly scale deltas so the ink's vertical extent is exactly 1.

    Aspect ratio is preserved. Zero vertical extent raises
    :class:`DegenerateExtent` unless ``fallback_to_width`` is set, in
    which case the glyph is normalized by its width instead (such glyphs
    end up with height != 1 and are skipped by the trainers).
    """
    pts_abs = to_absolute(glyph)
    min_x, min_y, max_x, max_y = ink_extents(pts_abs)
    height = max_y - min_y
    if height <= 0.0:
        if not fallback_to_width:
            raise DegenerateExtent("glyph has zero vertical ink extent")
        width = max_x - min_x
        if width <= 0.0:
            raise DegenerateExtent("glyph ink is a single point; cannot normalize")
        scale = 1.0 / width
    else:
        scale = 1.0 / height
    out = glyph.points.copy()
    out[:, 0] *= scale
    out[:, 1] *= scale
    return Glyph(out, glyph.category)


def line_absolute(line: TextLine) -> np.ndarray:
    """Absolute points of a chained line, concatenated over glyphs."""
    if not line.glyphs:
        raise EmptyTrajectory("line has no glyphs")
    all_pts = np.concatenate([g.points for g in line.glyphs], axis=0)
    return to_absolute(Glyph(all_pts))


def extract_layout(line: TextLine) -> Layout:
    """Measure each glyph's ink bounding box in shared line coordinates.

    Requires a chained line (glyph deltas continue across glyph
    boundaries). ``dx`` of the first box is its left edge relative to
    x = 0 of the line frame.
    """
    pts_abs = line_absolute(line)
    boxes = []
    offset = 0
    prev_right = 0.0
    for g in line.glyphs:
        seg = pts_abs[offset : offset + len(g)]
        offset += len(g)
        min_x, min_y, max_x, max_y = ink_extents(seg)
        boxes.append(
            BoundingBox(
                height=max_y - min_y,
                width=max_x - min_x,
                cy=(max_y + min_y) / 2.0,
                dx=min_x - prev_right,
            )
        )
        prev_right = max_x
    return Layout(boxes)


def compose_line(glyphs: Sequence[Glyph], layout: Layout, writer: str = "") -> TextLine:
    """Scale height-normalized glyphs into their boxes and chain them into a line.

    Each glyph is scaled anisotropically so its ink extents match its
    box's (width, height) and translated so the box sits at
    ``(left edge from dx chain, vertical center cy)``. Round-trips with
    :func:`extract_layout` for glyphs with positive ink extents.
    """
    if len(glyphs) != len(layout.boxes):
        raise ShapeMismatch(f"{len(glyphs)} glyphs vs {len(layout.boxes)} boxes")
    if not glyphs:
        raise EmptyTrajectory("cannot compose an empty line")
    placed = []
    prev_right = 0.0
    for g, box in zip(glyphs, layout.boxes):
        pts_abs = to_absolute(g)
        min_x, min_y, max_x, max_y = ink_extents(pts_abs)
        w, h = max_x - min_x, max_y - min_y
        sx = box.width / w if w > 0 else 1.0
        sy = box.height / h if h > 0 else 1.0
        left = prev_right + box.dx
        bottom = box.cy - box.height / 2.0
        out = pts_abs.copy()
        out[:, 0] = (out[:, 0] - min_x) * sx + left
        out[:, 1] = (out[:, 1] - min_y) * sy + bottom
        placed.append(out)
        prev_right = left + box.width
    chained = to_relative(np.concatenate(placed, axis=0))
    out_glyphs = []
    offset = 0
    for g in glyphs:
        out_glyphs.append(Glyph(chained[offset : offset + len(g)], g.category))
        offset += len(g)
    return TextLine(out_glyphs, writer=writer)


def pad_or_truncate(glyph: Glyph, n_max: int) -> Glyph:
    """Fix the point count to ``n_max``: truncate the tail or pad with (0, 0, -1)."""
    if n_max <= 0:
        raise InvalidValue(f"n_max must be positive, got {n_max}")
    pts = glyph.points
    if len(pts) >= n_max:
        out = pts[:n_max].copy()
    else:
        pad = np.tile(np.array([0.0, 0.0, -1.0]), (n_max - len(pts), 1))
        out = np.concatenate([pts, pad], axis=0)
    return Glyph(out, glyph.category)
