"""Glue between dataset records, preprocessing, and the model trainers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .corpus import make_rng
from .dataset import line_from_record, record_from_line
from .diffusion import FontSynthesizer, TrajectoryStandardizer
from .errors import ConfigMismatch, DegenerateExtent, EmptyDataset
from .layout import BoxCodec, LayoutModel
from .trajectory import (
    Glyph,
    Layout,
    TextLine,
    compose_line,
    extract_layout,
    ink_extents,
    line_absolute,
    normalize_height,
    pad_or_truncate,
    rdp_simplify,
    to_absolute,
    to_relative,
)


def glyph_ink_height(glyph: Glyph) -> float:
    _, min_y, _, max_y = ink_extents(to_absolute(glyph))
    return max_y - min_y


def record_is_decoupled(line: TextLine, layout: Layout | None) -> bool:
    """True when glyphs are stored in their own frames (layout carries placement)."""
    if layout is None:
        return False
    for g, box in zip(line.glyphs, layout.boxes):
        if abs(glyph_ink_height(g) - box.height) > 1e-6 * max(1.0, box.height):
            return True
    return False


def _reanchor(glyph: Glyph) -> Glyph:
    """Shift a glyph's frame so its ink bounding box starts at the origin."""
    pts = to_absolute(glyph)
    min_x, min_y, _, _ = ink_extents(pts)
    pts[:, 0] -= min_x
    pts[:, 1] -= min_y
    return Glyph(to_relative(pts), glyph.category)


def preprocess_record(rec: dict, rdp_eps: float = 2.0) -> dict:
    """Per-stroke RDP, layout extraction, then per-glyph height normalization.

    Already-preprocessed records (decoupled, with layout) pass through
    unchanged, which makes preprocessing idempotent; the RDP tolerance is
    meaningful only in raw capture coordinates. Glyphs with zero vertical
    extent are normalized by width instead (their height stays != 1, and
    the trainers skip them).
    """
    line, layout = line_from_record(rec)
    if record_is_decoupled(line, layout):
        return rec
    if rdp_eps > 0:
        line = TextLine([rdp_simplify(g, rdp_eps) for g in line.glyphs], writer=line.writer)
    extracted = extract_layout(line)
    normalized = [
        normalize_height(_reanchor(g), fallback_to_width=True) for g in line.glyphs
    ]
    return record_from_line(TextLine(normalized, writer=line.writer), extracted)


def layout_lines(records: list[dict]) -> list[tuple[np.ndarray, np.ndarray]]:
    """(categories, raw boxes) per record, extracting the layout when absent."""
    out = []
    for rec in records:
        line, layout = line_from_record(rec)
        if layout is None:
            layout = extract_layout(line)
        cats = np.array([g.category for g in line.glyphs], dtype=np.int64)
        out.append((cats, layout.as_array()))
    return out


@dataclass
class FontExample:
    x0: np.ndarray  # (n_pad, 3) height-normalized, padded glyph
    category: int
    writer: str
    record_index: int


def reference_trajectory(rec: dict, ref_len: int) -> np.ndarray:
    """A writer's line as one normalized trajectory of exactly ``ref_len`` points.

    Decoupled records are re-composed through their layout first; the
    chained line is scaled so its ink height is 1, truncated to
    ``ref_len``, and padded with (0, 0, -1).
    """
    if ref_len < 8 or ref_len % 8 != 0:
        raise ValueError("ref_len must be a multiple of 8 and at least 8")
    line, layout = line_from_record(rec)
    if record_is_decoupled(line, layout):
        line = compose_line(line.glyphs, layout, writer=line.writer)
    pts_abs = line_absolute(line)
    _, min_y, _, max_y = ink_extents(pts_abs)
    height = max_y - min_y
    deltas = to_relative(pts_abs)
    if height > 0:
        deltas[:, :2] /= height
    deltas = deltas[:ref_len]
    if len(deltas) < ref_len:
        pad = np.tile(np.array([0.0, 0.0, -1.0]), (ref_len - len(deltas), 1))
        deltas = np.concatenate([deltas, pad], axis=0)
    return deltas


def build_font_examples(
    records: list[dict], n_pad: int, ref_len: int
) -> tuple[list[FontExample], list[np.ndarray]]:
    """Padded training glyphs plus one reference trajectory per record.

    Glyphs whose ink height is not ~1 (degenerate width-normalized ones)
    are excluded from training.
    """
    examples: list[FontExample] = []
    references: list[np.ndarray] = []
    for ri, rec in enumerate(records):
        references.append(reference_trajectory(rec, ref_len))
        line, _ = line_from_record(rec)
        for g in line.glyphs:
            if abs(glyph_ink_height(g) - 1.0) > 1e-3:
                continue
            examples.append(FontExample(pad_or_truncate(g, n_pad).points, g.category, line.writer, ri))
    if not examples:
        raise EmptyDataset("no height-normalized glyphs found (run preprocess first?)")
    return examples, references


def max_category(records: list[dict]) -> int:
    cats = [g["cat"] for rec in records for g in rec["glyphs"]]
    if not cats:
        raise EmptyDataset("no glyphs in dataset")
    return int(max(cats))


# -- model checkpointing -------------------------------------------------------


def _params_state(params) -> dict[str, np.ndarray]:
    return {p.name: p.data for p in params}


def _load_params(params, tensors: dict[str, np.ndarray], source: str):
    for p in params:
        if p.name not in tensors:
            raise ConfigMismatch(f"{source}: checkpoint missing tensor {p.name!r}")
        stored = tensors[p.name]
        if stored.shape != p.data.shape:
            raise ConfigMismatch(
                f"{source}: tensor {p.name!r} shape {stored.shape} != expected {p.data.shape}"
            )
        p.tensor.data = stored.astype(np.float32)
        p.tensor.grad = None


def save_layout_model(model: LayoutModel, path: str, config: RunConfig):
    tensors = _params_state(model.parameters())
    tensors["layout.box_mean"] = model.codec.mean
    tensors["layout.box_std"] = model.codec.std
    tensors["meta.fingerprint"] = config.fingerprint()
    tensors["meta.n_categories"] = np.array([model.n_categories], np.float32)
    save_checkpoint(path, tensors)


def load_layout_model(path: str, config: RunConfig) -> LayoutModel:
    tensors = load_checkpoint(path)
    config.check_fingerprint(tensors.get("meta.fingerprint", np.zeros(0)), path)
    n_categories = int(tensors["meta.n_categories"][0])
    model = LayoutModel(n_categories, make_rng(0))
    _load_params(model.parameters(), tensors, path)
    model.codec = BoxCodec(
        tensors["layout.box_mean"].astype(np.float64), tensors["layout.box_std"].astype(np.float64)
    )
    return model


def save_font_model(synth: FontSynthesizer, path: str, config: RunConfig):
    tensors = _params_state(synth.parameters())
    tensors["font.input_mean"] = synth.standardizer.mean
    tensors["font.input_std"] = synth.standardizer.std
    tensors["meta.fingerprint"] = config.fingerprint()
    tensors["meta.n_categories"] = np.array([synth.n_categories], np.float32)
    save_checkpoint(path, tensors)


def load_font_model(path: str, config: RunConfig) -> FontSynthesizer:
    tensors = load_checkpoint(path)
    config.check_fingerprint(tensors.get("meta.fingerprint", np.zeros(0)), path)
    n_categories = int(tensors["meta.n_categories"][0])
    synth = FontSynthesizer(
        n_categories,
        config.base_channels,
        make_rng(0),
        n_max=config.font.n_max,
    )
    _load_params(synth.parameters(), tensors, path)
    synth.standardizer = TrajectoryStandardizer(
        tensors["font.input_mean"].astype(np.float64), tensors["font.input_std"].astype(np.float64)
    )
    return synth
