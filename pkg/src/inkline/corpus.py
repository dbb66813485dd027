"""Deterministic parametric-writer corpus for desk-scale training and tests.

Templates are synthetic grid-stroke patterns in the unit box (not real
script); writers warp them with slant, spacing, size, curvature, and
jitter parameters. Everything is a pure function of explicit seeds
(Philox counter-based RNG), so corpora are reproducible byte-for-byte.
Glyphs are emitted at raw "capture" scale (sizes around 100) so the
standard preprocessing tolerance (RDP epsilon 2) is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidValue
from .metrics import dtw_normalized
from .trajectory import BoundingBox, Glyph, Layout, TextLine, ink_extents, to_absolute, to_relative


def make_rng(*seed_parts: int) -> np.random.Generator:
    """Philox (64-bit counter-based) generator keyed by the given integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(seed_parts))))


@dataclass
class SyntheticWriter:
    """Parametric handwriting style used to warp glyph templates."""

    seed: int
    slant: float = 0.0          # vertical-center drift per glyph, capture units
    spacing_mu: float = 20.0    # mean horizontal offset between boxes
    spacing_sigma: float = 2.0
    size_scale: float = 100.0   # glyph height in capture units
    curvature: float = 0.0      # perpendicular bend, fraction of stroke chord
    jitter: float = 0.0         # per-point gaussian noise std
    name: str = ""

    def __post_init__(self):
        if self.spacing_sigma < 0 or self.size_scale <= 0 or self.jitter < 0:
            raise InvalidValue("writer parameters out of range")
        if not self.name:
            self.name = f"writer-{self.seed}"


@dataclass
class GlyphTemplate:
    """A category's canonical strokes, each a polyline inside [0, 1]^2."""

    category: int
    strokes: list[np.ndarray] = field(default_factory=list)


def strokes_to_glyph(strokes: list[np.ndarray], category: int) -> Glyph:
    """Encode absolute stroke polylines as a delta trajectory.

    Strokes after the first are preceded by one pen-up travel point at
    the stroke's start; glyph boundaries inside a line are implicit
    pen-lifts and need no travel point.
    """
    rows = []
    for si, stroke in enumerate(strokes):
        if si > 0:
            rows.append([stroke[0, 0], stroke[0, 1], -1.0])
        for x, y in stroke:
            rows.append([x, y, 1.0])
    return Glyph(to_relative(np.asarray(rows)), category)


def _resample_polyline(anchors: np.ndarray, points_per_segment: int) -> np.ndarray:
    out = [anchors[0]]
    for a, b in zip(anchors[:-1], anchors[1:]):
        for j in range(1, points_per_segment + 1):
            t = j / points_per_segment
            out.append(a + t * (b - a))
    return np.asarray(out)


def _candidate_template(category: int, rng: np.random.Generator) -> GlyphTemplate:
    grid = np.linspace(0.0, 1.0, 4)
    n_strokes = int(rng.integers(1, 4))
    strokes = []
    for _ in range(n_strokes):
        n_anchor = int(rng.integers(2, 5))
        idx = rng.choice(16, size=n_anchor, replace=False)
        anchors = np.stack([grid[idx % 4], grid[idx // 4]], axis=1)
        strokes.append(_resample_polyline(anchors, points_per_segment=3))
    return GlyphTemplate(category, strokes)


def _template_spans_height(tpl: GlyphTemplate) -> bool:
    ys = np.concatenate([s[:, 1] for s in tpl.strokes])
    return ys.min() <= 0.05 and ys.max() >= 0.95


def make_template_set(n_categories: int, seed: int, min_dtw: float = 0.05) -> list[GlyphTemplate]:
    """Build ``n_categories`` distinct templates; pairwise normalized DTW >= ``min_dtw``."""
    if n_categories < 2:
        raise InvalidValue("need at least 2 categories")
    rng = make_rng(seed, 0xC0DE)
    accepted: list[GlyphTemplate] = []
    accepted_glyphs: list[Glyph] = []
    while len(accepted) < n_categories:
        cand = _candidate_template(len(accepted), rng)
        if not _template_spans_height(cand):
            continue
        glyph = strokes_to_glyph(cand.strokes, cand.category)
        if all(dtw_normalized(glyph, g) >= min_dtw for g in accepted_glyphs):
            accepted.append(cand)
            accepted_glyphs.append(glyph)
    return accepted


def _bend(stroke: np.ndarray, curvature: float) -> np.ndarray:
    if curvature == 0.0 or len(stroke) < 3:
        return stroke
    chord = stroke[-1] - stroke[0]
    norm = float(np.hypot(chord[0], chord[1]))
    if norm == 0.0:
        return stroke
    perp = np.array([-chord[1], chord[0]]) / norm
    u = np.linspace(0.0, 1.0, len(stroke))
    return stroke + np.outer(np.sin(np.pi * u) * curvature * norm, perp)


def render_glyph(template: GlyphTemplate, writer: SyntheticWriter, seed: int) -> Glyph:
    """Warp a template with the writer's style; identity when all params are neutral."""
    rng = make_rng(writer.seed, seed, template.category)
    strokes = []
    for stroke in template.strokes:
        s = _bend(stroke, writer.curvature) * writer.size_scale
        if writer.jitter > 0:
            s = s + rng.normal(0.0, writer.jitter, size=s.shape)
        strokes.append(s)
    return strokes_to_glyph(strokes, template.category)


def render_line(
    categories: list[int],
    writer: SyntheticWriter,
    seed: int,
    templates: list[GlyphTemplate],
) -> tuple[TextLine, Layout]:
    """Render a chained text line; returns the exact placement as ground truth.

    Glyphs go left-to-right with dx ~ N(spacing_mu, spacing_sigma^2); the
    vertical center of glyph i sits at slant * i. The returned layout is
    measured from the placed ink, so it round-trips through layout
    extraction exactly.
    """
    if not categories:
        raise InvalidValue("need at least one category")
    rng = make_rng(writer.seed, seed, 0x11FE)
    glyph_seeds = rng.integers(0, 2**62, size=len(categories))
    dxs = rng.normal(writer.spacing_mu, writer.spacing_sigma, size=len(categories))

    abs_chunks = []
    boxes = []
    counts = []
    prev_right = 0.0
    for i, cat in enumerate(categories):
        glyph = render_glyph(templates[cat], writer, int(glyph_seeds[i]))
        pts = to_absolute(glyph)
        min_x, min_y, max_x, max_y = ink_extents(pts)
        h, w = max_y - min_y, max_x - min_x
        left = prev_right + dxs[i]
        cy = writer.slant * i
        shift = np.array([left - min_x, cy - (max_y + min_y) / 2.0, 0.0])
        pts = pts + shift
        abs_chunks.append(pts)
        counts.append(len(pts))
        boxes.append(BoundingBox(height=h, width=w, cy=cy, dx=float(dxs[i])))
        prev_right = left + w
    chained = to_relative(np.concatenate(abs_chunks, axis=0))
    glyphs = []
    offset = 0
    for cat, n in zip(categories, counts):
        glyphs.append(Glyph(chained[offset : offset + n], cat))
        offset += n
    return TextLine(glyphs, writer=writer.name), Layout(boxes)


def default_writers(count: int = 8, seed: int = 7) -> list[SyntheticWriter]:
    """A well-separated writer family; writers 0 and 1 differ only in slant sign."""
    # spacing noise is deliberately large relative to the between-writer
    # spread: estimating a writer's spacing then takes several boxes, so
    # in-context quality improves measurably with prefix length
    base = [
        (5.0, 18.0, 6.0, 100.0, 0.10, 0.8),
        (-5.0, 18.0, 6.0, 100.0, 0.10, 0.8),
        (0.0, 10.0, 3.0, 72.0, 0.00, 0.4),
        (2.0, 44.0, 7.5, 88.0, 0.18, 1.2),
        (-3.0, 36.0, 4.5, 112.0, 0.05, 0.6),
        (8.0, 24.0, 9.0, 96.0, 0.22, 1.0),
        (-8.0, 14.0, 3.6, 80.0, 0.12, 1.4),
        (-6.0, 32.0, 6.0, 105.0, 0.08, 0.7),
    ]
    rng = make_rng(seed, 0xFA11)
    writers = []
    for i in range(count):
        if i < len(base):
            slant, mu, sigma, size, curv, jit = base[i]
        else:
            slant = float(rng.uniform(-8, 8))
            mu = float(rng.uniform(10, 45))
            sigma = float(rng.uniform(1.0, 3.5))
            size = float(rng.uniform(70, 125))
            curv = float(rng.uniform(0.0, 0.22))
            jit = float(rng.uniform(0.3, 1.5))
        writers.append(
            SyntheticWriter(
                seed=seed * 1000 + i,
                slant=slant,
                spacing_mu=mu,
                spacing_sigma=sigma,
                size_scale=size,
                curvature=curv,
                jitter=jit,
                name=f"w{i:02d}",
            )
        )
    return writers
