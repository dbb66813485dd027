import numpy as np
import pytest

from inkline.classifiers import (
    accuracy,
    build_content_examples,
    build_style_examples,
    classify,
    train_classifier,
)
from inkline.corpus import make_rng
from inkline.errors import NeedTwoClasses


def offset_dataset(rng, n_per_class=12, offset=0.1):
    """Class is determined by a constant shift of the dh channel."""
    data = []
    for label, sign in ((0, +1.0), (1, -1.0)):
        for _ in range(n_per_class):
            pts = np.column_stack([
                rng.normal(sign * offset, 0.02, 24),
                rng.normal(0, 0.05, 24),
                np.ones(24),
            ])
            data.append((pts, label))
    return data


def test_separable_dataset_reaches_high_train_accuracy(rng):
    data = offset_dataset(rng)
    clf = train_classifier("content", data, make_rng(3), base_channels=4, steps=150)
    assert accuracy(clf, data) >= 0.99


def test_classify_deterministic(rng):
    data = offset_dataset(rng)
    clf = train_classifier("content", data, make_rng(3), base_channels=4, steps=30)
    x = data[0][0]
    assert classify(clf, x) == classify(clf, x)


def test_needs_two_classes(rng):
    data = [(rng.normal(0, 1, (16, 3)), 0) for _ in range(4)]
    with pytest.raises(NeedTwoClasses):
        train_classifier("content", data, make_rng(1))


def test_example_builders():
    rec = {
        "writer": "w1",
        "glyphs": [
            {"cat": 3, "points": [[0, 0, 1], [1, 0, 1]]},
            {"cat": 5, "points": [[0, 1, 1]]},
        ],
    }
    content = build_content_examples([rec])
    assert [lbl for _, lbl in content] == [3, 5]
    style = build_style_examples([rec], make_rng(0), groups_per_writer=2)
    assert len(style) == 2
    assert all(lbl == "w1" for _, lbl in style)
    # each group concatenates up to fifteen glyph trajectories along time
    assert style[0][0].shape[1] == 3
