"""Toy content and style classifiers used for evaluation scores.

Both reuse the style-encoder trunk (toy channel config) with global mean
pooling over the deepest feature sequence and a linear head. The content
task classifies single glyphs into categories; the style task classifies
groups of fifteen same-writer glyphs, concatenated along time, into
writer identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .blocks import Linear
from .dataset import line_from_record
from .diffusion import TrajectoryStandardizer
from .errors import NeedTwoClasses
from .nn import Tensor
from .style_encoder import StyleEncoder

STYLE_GROUP_SIZE = 15


@dataclass
class Classifier:
    task: str
    encoder: StyleEncoder
    head: Linear
    standardizer: TrajectoryStandardizer
    classes: list

    def parameters(self):
        return self.encoder.trunk_parameters() + self.head.parameters()

    def logits(self, batch: np.ndarray) -> Tensor:
        feats = self.encoder.encode(Tensor(batch.astype(np.float32)))
        return self.head(nn.mean(feats.f3, axis=1))


def _pad_batch(trajectories: list[np.ndarray]) -> np.ndarray:
    L = max(8, max(len(t) for t in trajectories))
    L = ((L + 7) // 8) * 8
    out = np.tile(np.array([0.0, 0.0, -1.0]), (len(trajectories), L, 1))
    for i, t in enumerate(trajectories):
        out[i, : len(t)] = t[:L]
    return out


def train_classifier(
    task: str,
    dataset: list[tuple[np.ndarray, object]],
    rng: np.random.Generator,
    *,
    base_channels: int = 16,
    steps: int = 400,
    batch_size: int = 16,
    learning_rate: float = 1e-3,
) -> Classifier:
    """Train a classifier on (trajectory, label) pairs; labels may be any hashable."""
    classes = sorted({label for _, label in dataset})
    if len(classes) < 2:
        raise NeedTwoClasses(f"need >= 2 classes, got {len(classes)}")
    index = {c: i for i, c in enumerate(classes)}
    standardizer = TrajectoryStandardizer.fit(np.concatenate([t for t, _ in dataset], axis=0))
    trajs = [standardizer.apply(t) for t, _ in dataset]
    labels = np.array([index[label] for _, label in dataset], dtype=np.int64)

    encoder = StyleEncoder(base_channels, rng, name=f"clf.{task}")
    head = Linear(f"clf.{task}.head", 8 * base_channels, len(classes), rng)
    clf = Classifier(task, encoder, head, standardizer, classes)
    params = clf.parameters()
    opt = nn.AdamState(params, learning_rate)
    for _ in range(steps):
        idx = rng.choice(len(trajs), size=min(batch_size, len(trajs)), replace=False)
        batch = _pad_batch([trajs[i] for i in idx])
        loss = nn.cross_entropy(clf.logits(batch), labels[idx])
        loss.backward()
        opt.step(params)
    return clf


def classify(clf: Classifier, trajectory: np.ndarray):
    """Deterministic argmax class of one trajectory."""
    with nn.no_grad():
        logits = clf.logits(_pad_batch([clf.standardizer.apply(trajectory)]))
    return clf.classes[int(np.argmax(logits.numpy()[0]))]


def accuracy(clf: Classifier, dataset: list[tuple[np.ndarray, object]]) -> float:
    hits = sum(1 for t, label in dataset if classify(clf, t) == label)
    return hits / len(dataset)


def build_content_examples(records: list[dict]) -> list[tuple[np.ndarray, int]]:
    """One example per glyph: (points, category)."""
    out = []
    for rec in records:
        line, _ = line_from_record(rec)
        for g in line.glyphs:
            out.append((g.points, g.category))
    return out


def build_style_examples(
    records: list[dict], rng: np.random.Generator, groups_per_writer: int = 8
) -> list[tuple[np.ndarray, str]]:
    """Fifteen same-writer glyphs concatenated along time, labeled by writer."""
    by_writer: dict[str, list[np.ndarray]] = {}
    for rec in records:
        line, _ = line_from_record(rec)
        for g in line.glyphs:
            by_writer.setdefault(line.writer, []).append(g.points)
    out = []
    for writer, glyphs in sorted(by_writer.items()):
        for _ in range(groups_per_writer):
            idx = rng.choice(len(glyphs), size=min(STYLE_GROUP_SIZE, len(glyphs)), replace=True)
            out.append((np.concatenate([glyphs[i] for i in idx], axis=0), writer))
    return out
