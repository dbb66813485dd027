"""Quantitative evaluation: normalized DTW, layout geometry features, AR/CR.

DTW operates on the absolute pen-down coordinates of height-normalized
glyphs (pen-up travel points are excluded from the cost); the optimal
path cost is divided by the sum of the two ink lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDataset, EmptyReference, EmptyTrajectory, NeedTwoBoxes
from .trajectory import Glyph, Layout, ink_mask, to_absolute


def _ink_xy(glyph: Glyph) -> np.ndarray:
    pts = to_absolute(glyph)
    mask = ink_mask(pts)
    if not mask.any():
        raise EmptyTrajectory("glyph has no pen-down points")
    return pts[mask, :2]


def dtw_normalized(a: Glyph, b: Glyph) -> float:
    """Normalized dynamic time warping distance between two glyphs."""
    xa, xb = _ink_xy(a), _ink_xy(b)
    n, m = len(xa), len(xb)
    cost = np.hypot(xa[:, 0:1] - xb[None, :, 0], xa[:, 1:2] - xb[None, :, 1])
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = acc[i]
        prev = acc[i - 1]
        ci = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = ci[j - 1] + min(prev[j], row[j - 1], prev[j - 1])
    return float(acc[n, m]) / (n + m)


@dataclass
class GeoFeatureVector:
    """The 8 adjacent-pair layout features, indexed 1..8."""

    v: np.ndarray  # shape (8,)

    def __getitem__(self, i: int) -> float:
        return float(self.v[i])


def _box_geometry(layout: Layout) -> dict[str, np.ndarray]:
    arr = layout.as_array()
    h, w, cy, dx = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    left = np.empty(len(arr))
    prev_right = 0.0
    for i in range(len(arr)):
        left[i] = prev_right + dx[i]
        prev_right = left[i] + w[i]
    return {
        "h": h,
        "w": w,
        "cy": cy,
        "hc": left + w / 2.0,
        "top": cy + h / 2.0,
        "bot": cy - h / 2.0,
        "left": left,
        "right": left + w,
    }


def geo_features(layout: Layout) -> GeoFeatureVector:
    """Mean adjacent-pair geometric features of a layout.

    1: |d vertical center|  2: |d horizontal center|  3: |d top|
    4: |d bottom|  5: |d left|  6: |d right|  7: height ratio
    (later/earlier)  8: width ratio (later/earlier).
    """
    if len(layout) < 2:
        raise NeedTwoBoxes(f"need >= 2 boxes, got {len(layout)}")
    g = _box_geometry(layout)
    feats = np.array(
        [
            np.mean(np.abs(np.diff(g["cy"]))),
            np.mean(np.abs(np.diff(g["hc"]))),
            np.mean(np.abs(np.diff(g["top"]))),
            np.mean(np.abs(np.diff(g["bot"]))),
            np.mean(np.abs(np.diff(g["left"]))),
            np.mean(np.abs(np.diff(g["right"]))),
            np.mean(g["h"][1:] / g["h"][:-1]),
            np.mean(g["w"][1:] / g["w"][:-1]),
        ]
    )
    return GeoFeatureVector(feats)


def feature_gap(generated: Sequence[Layout], real: Sequence[Layout]) -> np.ndarray:
    """Absolute gap of mean geometric features between two layout sets."""
    if not generated or not real:
        raise EmptyDataset("feature_gap needs non-empty layout sets")
    gen_mean = np.mean([geo_features(l).v for l in generated], axis=0)
    real_mean = np.mean([geo_features(l).v for l in real], axis=0)
    return np.abs(gen_mean - real_mean)


@dataclass
class RecognitionCounts:
    """Edit-operation counts from aligning a hypothesis to a reference."""

    n_total: int
    substitutions: int
    deletions: int
    insertions: int

    def __add__(self, other: "RecognitionCounts") -> "RecognitionCounts":
        return RecognitionCounts(
            self.n_total + other.n_total,
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
        )


def align_and_count(reference: Sequence[int], hypothesis: Sequence[int]) -> RecognitionCounts:
    """Levenshtein alignment with unit costs.

    Tie-break while backtracking: substitution/match first, then
    deletion, then insertion.
    """
    ref, hyp = list(reference), list(hypothesis)
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            d[i, j] = min(sub, d[i - 1, j] + 1, d[i, j - 1] + 1)
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return RecognitionCounts(n, subs, dels, ins)


def ar_cr(counts: RecognitionCounts) -> tuple[float, float]:
    """(accurate rate, correct rate) from recognition counts."""
    n = counts.n_total
    if n <= 0:
        raise EmptyReference("AR/CR need a non-empty reference")
    cr = (n - counts.deletions - counts.substitutions) / n
    ar = (n - counts.deletions - counts.substitutions - counts.insertions) / n
    return ar, cr
