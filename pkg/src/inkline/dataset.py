"""JSONL dataset records.

One record per text line:
``{"writer": str, "glyphs": [{"cat": int, "points": [[dh, dv, s], ...]}, ...],
"layout": [[h, w, cy, dx], ...]}`` with ``layout`` optional. Raw records
chain glyph deltas across the line; preprocessed records carry
height-normalized glyphs plus the extracted layout.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Iterator

import numpy as np

from .errors import IoError, ParseError
from .trajectory import Glyph, Layout, TextLine


def record_from_line(line: TextLine, layout: Layout | None = None) -> dict:
    rec = {
        "writer": line.writer,
        "glyphs": [
            {"cat": int(g.category), "points": [[float(a), float(b), float(s)] for a, b, s in g.points]}
            for g in line.glyphs
        ],
    }
    if layout is not None:
        rec["layout"] = [[b.height, b.width, b.cy, b.dx] for b in layout.boxes]
    return rec


def line_from_record(rec: dict) -> tuple[TextLine, Layout | None]:
    glyphs = [Glyph(np.asarray(g["points"], dtype=np.float64), int(g["cat"])) for g in rec["glyphs"]]
    line = TextLine(glyphs, writer=rec.get("writer", ""))
    layout = Layout.from_array(rec["layout"]) if rec.get("layout") is not None else None
    return line, layout


def _validate_record(rec: dict, line_number: int):
    if not isinstance(rec, dict) or "glyphs" not in rec or "writer" not in rec:
        raise ParseError(f"line {line_number}: record missing 'writer'/'glyphs'", line_number)
    for g in rec["glyphs"]:
        if "cat" not in g or "points" not in g or not g["points"]:
            raise ParseError(f"line {line_number}: glyph missing 'cat'/'points'", line_number)
        for p in g["points"]:
            if len(p) != 3 or p[2] not in (-1.0, 1.0, -1, 1):
                raise ParseError(
                    f"line {line_number}: point must be [dh, dv, s] with s in {{-1, 1}}", line_number
                )
    layout = rec.get("layout")
    if layout is not None and len(layout) != len(rec["glyphs"]):
        raise ParseError(f"line {line_number}: layout length != glyph count", line_number)


def write_records(path: str, records: Iterable[dict]):
    """Write records as canonical JSONL (deterministic bytes for equal input)."""
    try:
        with open(path, "w", encoding="utf-8") as f:
            for rec in records:
                f.write(json.dumps(rec, separators=(",", ":")) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_records(path: str) -> list[dict]:
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    records = []
    with f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"line {i}: invalid JSON ({e.msg})", i) from e
            _validate_record(rec, i)
            records.append(rec)
    return records
