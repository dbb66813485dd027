import xml.etree.ElementTree as ET

import numpy as np
import pytest

from inkline.errors import EmptyTrajectory
from inkline.svg import line_strokes, render_svg
from inkline.trajectory import Glyph, TextLine, to_absolute, to_relative


def three_stroke_glyph():
    rows = [
        [0.0, 0.0, 1.0], [1.0, 0.0, 1.0],           # stroke 1
        [1.0, 1.0, -1.0],                            # travel
        [1.0, 1.0, 1.0], [2.0, 1.0, 1.0],            # stroke 2
        [0.0, 2.0, -1.0],
        [0.0, 2.0, 1.0], [0.5, 2.5, 1.0],            # stroke 3
    ]
    return Glyph(to_relative(np.array(rows)))


def test_three_strokes_three_polylines():
    svg = render_svg(TextLine([three_stroke_glyph()]))
    root = ET.fromstring(svg)
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 3


def test_svg_parses_strictly_and_has_viewbox_margin():
    svg = render_svg(TextLine([three_stroke_glyph()]), color_per_stroke=True)
    root = ET.fromstring(svg)
    min_x, min_y, w, h = (float(v) for v in root.attrib["viewBox"].split())
    # ink spans x in [0, 2], y in [0, 2.5]; 5% margin on each side
    assert min_x == pytest.approx(-0.1)
    assert w == pytest.approx(2.2)
    assert min_y == pytest.approx(-0.125)
    assert h == pytest.approx(2.75)


def test_polyline_coordinates_match_absolute(rng):
    pts = np.cumsum(rng.normal(0, 5, size=(12, 3)), axis=0)
    pts[:, 2] = 1.0
    glyph = Glyph(to_relative(pts))
    line = TextLine([glyph])
    svg = render_svg(line)
    root = ET.fromstring(svg)
    poly = next(el for el in root.iter() if el.tag.endswith("polyline"))
    coords = np.array([[float(c) for c in pair.split(",")] for pair in poly.attrib["points"].split()])
    assert np.abs(coords - to_absolute(glyph)[:, :2]).max() < 1e-4


def test_strokes_do_not_cross_glyph_boundaries():
    # two single-stroke glyphs chained: boundary is an implicit pen lift
    g1 = Glyph(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]]))
    g2 = Glyph(np.array([[1.0, 0.0, 1.0], [1.0, 1.0, 1.0]]), 1)
    strokes = line_strokes(TextLine([g1, g2]))
    assert len(strokes) == 2


def test_empty_line_raises():
    g = Glyph(np.array([[0.0, 0.0, -1.0]]))
    with pytest.raises(EmptyTrajectory):
        render_svg(TextLine([g]))


def test_color_per_stroke_differs():
    svg_mono = render_svg(TextLine([three_stroke_glyph()]))
    svg_color = render_svg(TextLine([three_stroke_glyph()]), color_per_stroke=True)
    root_m = ET.fromstring(svg_mono)
    root_c = ET.fromstring(svg_color)
    colors_m = {el.attrib["stroke"] for el in root_m.iter() if el.tag.endswith("polyline")}
    colors_c = {el.attrib["stroke"] for el in root_c.iter() if el.tag.endswith("polyline")}
    assert len(colors_m) == 1
    assert len(colors_c) == 3
