import numpy as np
import pytest

from inkline.corpus import (
    SyntheticWriter,
    default_writers,
    make_rng,
    make_template_set,
    render_glyph,
    render_line,
    strokes_to_glyph,
)
from inkline.errors import InvalidValue
from inkline.metrics import dtw_normalized
from inkline.trajectory import extract_layout, to_absolute


def neutral_writer(seed=1, **kwargs):
    defaults = dict(slant=0.0, spacing_mu=2.0, spacing_sigma=0.0, size_scale=1.0,
                    curvature=0.0, jitter=0.0)
    defaults.update(kwargs)
    return SyntheticWriter(seed=seed, **defaults)


def test_templates_deterministic():
    a = make_template_set(6, seed=3)
    b = make_template_set(6, seed=3)
    for ta, tb in zip(a, b):
        assert len(ta.strokes) == len(tb.strokes)
        for sa, sb in zip(ta.strokes, tb.strokes):
            assert np.array_equal(sa, sb)


def test_templates_distinct_and_in_unit_box():
    tpls = make_template_set(5, seed=11)
    assert len(tpls) == 5
    for t in tpls:
        pts = np.concatenate(t.strokes)
        assert pts.min() >= -1e-9 and pts.max() <= 1 + 1e-9
    glyphs = [strokes_to_glyph(t.strokes, t.category) for t in tpls]
    for i in range(5):
        for j in range(i + 1, 5):
            assert dtw_normalized(glyphs[i], glyphs[j]) >= 0.05


def test_template_min_pairwise_dtw_at_k20():
    tpls = make_template_set(20, seed=0)
    glyphs = [strokes_to_glyph(t.strokes, t.category) for t in tpls]
    worst = min(
        dtw_normalized(glyphs[i], glyphs[j])
        for i in range(20)
        for j in range(i + 1, 20)
    )
    assert worst >= 0.05


def test_render_identity_writer_reproduces_template():
    tpl = make_template_set(3, seed=5)[0]
    glyph = render_glyph(tpl, neutral_writer(), seed=9)
    reference = strokes_to_glyph(tpl.strokes, tpl.category)
    assert np.allclose(glyph.points, reference.points)


def test_render_deterministic():
    tpl = make_template_set(3, seed=5)[1]
    w = neutral_writer(jitter=0.5)
    a = render_glyph(tpl, w, seed=42)
    b = render_glyph(tpl, w, seed=42)
    assert np.array_equal(a.points, b.points)


def test_render_jitter_displacement_moments():
    # each rendered point's absolute position gets iid N(0, sigma) noise
    # per coordinate (travel points share their stroke start's draw)
    tpl = make_template_set(3, seed=5)[2]
    clean = to_absolute(render_glyph(tpl, neutral_writer(), seed=1))
    sigma = 0.01
    diffs = []
    for s in range(300):
        noisy = to_absolute(render_glyph(tpl, neutral_writer(jitter=sigma), seed=s))
        diffs.append((noisy[:, :2] - clean[:, :2]).ravel())
    d = np.concatenate(diffs)
    expected = sigma * np.sqrt(2.0 / np.pi)  # E|N(0, sigma)|
    se = sigma * np.sqrt(1.0 - 2.0 / np.pi) / np.sqrt(len(d))
    assert abs(np.abs(d).mean() - expected) < 4 * se


def test_render_line_slant_arithmetic():
    tpls = make_template_set(4, seed=2)
    writer = neutral_writer(slant=0.05, spacing_sigma=0.0)
    line, layout = render_line([0, 1, 2, 3, 0, 1, 2, 3, 0, 1], writer, seed=3, templates=tpls)
    cys = [b.cy for b in layout.boxes]
    assert cys[-1] - cys[0] == pytest.approx(0.45)


def test_render_line_layout_round_trip():
    tpls = make_template_set(5, seed=2)
    writer = SyntheticWriter(seed=4, slant=3.0, spacing_mu=20.0, spacing_sigma=2.0,
                             size_scale=90.0, curvature=0.15, jitter=1.0)
    line, layout = render_line([0, 2, 4, 1, 3], writer, seed=8, templates=tpls)
    extracted = extract_layout(line)
    assert np.abs(extracted.as_array() - layout.as_array()).max() < 1e-6


def test_render_line_spacing_reflects_writer():
    tpls = make_template_set(3, seed=2)
    cats = [0, 1, 2] * 4
    _, narrow = render_line(cats, neutral_writer(spacing_mu=0.1, seed=5), 1, tpls)
    _, wide = render_line(cats, neutral_writer(spacing_mu=0.5, seed=5), 1, tpls)
    assert np.mean([b.dx for b in wide.boxes]) > np.mean([b.dx for b in narrow.boxes]) + 0.3


def test_render_line_needs_category():
    with pytest.raises(InvalidValue):
        render_line([], neutral_writer(), 1, make_template_set(2, seed=1))


def test_writer_validation():
    with pytest.raises(InvalidValue):
        SyntheticWriter(seed=1, size_scale=0.0)


def test_default_writers_slant_pair():
    writers = default_writers(8)
    assert writers[0].slant == -writers[1].slant != 0
    assert writers[0].spacing_mu == writers[1].spacing_mu
    assert writers[0].size_scale == writers[1].size_scale
    assert len({w.name for w in writers}) == 8


def test_corpus_reproducible():
    tpls = make_template_set(4, seed=6)
    w = default_writers(2)[0]
    a, la = render_line([0, 1, 2, 3], w, seed=77, templates=tpls)
    b, lb = render_line([0, 1, 2, 3], w, seed=77, templates=tpls)
    for ga, gb in zip(a.glyphs, b.glyphs):
        assert np.array_equal(ga.points, gb.points)
    assert np.array_equal(la.as_array(), lb.as_array())
