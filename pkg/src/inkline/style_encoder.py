"""Multi-scale calligraphy style encoder with a per-scale contrastive objective.

The encoder downsamples a trajectory three times (strides 2/4/8) and
returns one feature sequence per scale. For training, two disjoint
segments of the same writer's feature sequence form a positive pair; the
per-scale loss contrasts each writer's positive pair against the other
writers' positives under a temperature-scaled inner product of pooled,
linearly projected segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .blocks import Conv1d, DownBlock, Linear
from .errors import NeedTwoWriters, SequenceTooShort, ShapeMismatch
from .nn import Parameter, Tensor


@dataclass
class ContrastiveConfig:
    tau: float = 0.1
    segment_len: int = 4
    weights: tuple[float, float, float] = (0.01, 0.1, 0.1)
    batch_writers: int = 16

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.segment_len < 1:
            raise ValueError("segment_len must be >= 1")


@dataclass
class MultiScaleFeatures:
    """Per-scale feature sequences, time-major: (B, L/2^s, C_s) or (L/2^s, C_s)."""

    f1: Tensor
    f2: Tensor
    f3: Tensor

    def scale(self, s: int) -> Tensor:
        return (self.f1, self.f2, self.f3)[s - 1]


class StyleEncoder:
    """Stem conv plus three down blocks; channels c -> 2c -> 4c -> 8c."""

    def __init__(self, base_channels: int, rng: np.random.Generator, name: str = "style",
                 proj_dim: int | None = None):
        c = base_channels
        self.base_channels = c
        self.proj_dim = proj_dim if proj_dim is not None else c
        self.stem = Conv1d(name + ".stem", 3, c, 1, rng)
        self.block1 = DownBlock(name + ".f1", c, 2 * c, rng)
        self.block2 = DownBlock(name + ".f2", 2 * c, 4 * c, rng)
        self.block3 = DownBlock(name + ".f3", 4 * c, 8 * c, rng)
        self.proj = [
            Linear(name + ".g1", 2 * c, self.proj_dim, rng, bias=False),
            Linear(name + ".g2", 4 * c, self.proj_dim, rng, bias=False),
            Linear(name + ".g3", 8 * c, self.proj_dim, rng, bias=False),
        ]

    def parameters(self) -> list[Parameter]:
        out = self.stem.parameters()
        for b in (self.block1, self.block2, self.block3):
            out += b.parameters()
        for p in self.proj:
            out += p.parameters()
        return out

    def trunk_parameters(self) -> list[Parameter]:
        out = self.stem.parameters()
        for b in (self.block1, self.block2, self.block3):
            out += b.parameters()
        return out

    def encode(self, x) -> MultiScaleFeatures:
        """Encode a trajectory (L, 3) or batch (B, L, 3); L must be a multiple of 8."""
        x = nn.as_tensor(x)
        squeeze = x.ndim == 2
        if squeeze:
            x = x.reshape((1,) + x.shape)
        if x.ndim != 3 or x.shape[2] != 3:
            raise ShapeMismatch(f"expected (L, 3) or (B, L, 3), got {x.shape}")
        L = x.shape[1]
        if L < 8 or L % 8 != 0:
            raise ShapeMismatch(f"input length {L} must be a positive multiple of 8")
        h = self.stem(nn.transpose(x, (0, 2, 1)))
        h1 = self.block1(h)
        h2 = self.block2(h1)
        h3 = self.block3(h2)
        f1, f2, f3 = (nn.transpose(t, (0, 2, 1)) for t in (h1, h2, h3))
        if squeeze:
            f1, f2, f3 = (t.reshape(t.shape[1:]) for t in (f1, f2, f3))
        return MultiScaleFeatures(f1, f2, f3)


def sample_segments(f: Tensor, segment_len: int, rng: np.random.Generator) -> tuple[Tensor, Tensor]:
    """Two disjoint contiguous windows of length ``segment_len``, uniform over ordered pairs."""
    L = f.shape[0]
    l = segment_len
    if L < 2 * l:
        raise SequenceTooShort(f"sequence length {L} < 2 * segment_len {l}")
    hi = L - l
    while True:
        i = int(rng.integers(0, hi + 1))
        j = int(rng.integers(0, hi + 1))
        if abs(i - j) >= l:
            return f[i : i + l], f[j : j + l]


def _pool_project(segment: Tensor, projection: Linear) -> Tensor:
    return projection(nn.mean(segment, axis=0))


def contrastive_loss_scale(
    pairs: list[tuple[Tensor, Tensor]], projection: Linear, tau: float
) -> Tensor:
    """Per-scale contrastive loss over one (segment, positive) pair per writer.

    For writer k the positive similarity is contrasted against the other
    writers' positives only; similarities are inner products of the
    time-pooled, projected segments divided by ``tau``.
    """
    b = len(pairs)
    if b < 2:
        raise NeedTwoWriters(f"contrastive loss needs >= 2 writers, got {b}")
    anchors = nn.concat([_pool_project(e, projection).reshape(1, -1) for e, _ in pairs], axis=0)
    positives = nn.concat([_pool_project(ep, projection).reshape(1, -1) for _, ep in pairs], axis=0)
    sims = nn.mul(nn.matmul(anchors, nn.transpose(positives)), 1.0 / tau)
    diag = sims[(np.arange(b), np.arange(b))]
    rows = np.repeat(np.arange(b), b - 1)
    cols = np.concatenate([np.delete(np.arange(b), k) for k in range(b)])
    off = sims[(rows, cols)].reshape(b, b - 1)
    return nn.mean(nn.logsumexp(off, axis=-1) - diag)


def multi_scale_contrastive_loss(
    encoder: StyleEncoder,
    glyph_batch: Tensor,
    config: ContrastiveConfig,
    rng: np.random.Generator,
) -> Tensor:
    """Weighted sum of the three per-scale losses for one glyph per writer.

    ``glyph_batch`` is (b, L, 3) with one glyph from each of b distinct
    writers. If a scale is too short for two disjoint segments, the
    segment length shrinks to floor(L/2); a scale of length < 2 is
    skipped.
    """
    b = glyph_batch.shape[0]
    if b < 2:
        raise NeedTwoWriters(f"contrastive batch needs >= 2 writers, got {b}")
    feats = encoder.encode(glyph_batch)
    scale_rngs = rng.spawn(3)  # independent streams: one scale's draws never shift another's
    total = None
    for s in (1, 2, 3):
        weight = config.weights[s - 1]
        if weight == 0.0:
            continue
        f = feats.scale(s)
        L = f.shape[1]
        l = config.segment_len if L >= 2 * config.segment_len else L // 2
        if l < 1:
            continue
        pairs = [sample_segments(f[k], l, scale_rngs[s - 1]) for k in range(b)]
        term = nn.mul(contrastive_loss_scale(pairs, encoder.proj[s - 1], config.tau), weight)
        total = term if total is None else total + term
    return total if total is not None else Tensor(np.zeros((), np.float32))


def train_contrastive(
    encoder: StyleEncoder,
    glyphs_by_writer: list[list[np.ndarray]],
    config: ContrastiveConfig,
    steps: int,
    learning_rate: float,
    rng: np.random.Generator,
    clip_norm: float = 1.0,
    weight_decay: float = 1e-3,
) -> list[float]:
    """Train the encoder (and projections) with the contrastive loss alone.

    ``glyphs_by_writer[w]`` holds that writer's standardized, padded
    (L, 3) trajectories; all must share one length. The unnormalized
    inner-product similarity is unbounded below in the projection scale,
    so training uses gradient clipping plus decoupled weight decay to
    keep the scale escape in check. Returns the loss history.
    """
    n_writers = len(glyphs_by_writer)
    if n_writers < 2:
        raise NeedTwoWriters("contrastive training needs >= 2 writers")
    params = encoder.parameters()
    opt = nn.AdamState(params, learning_rate, clip_norm=clip_norm)
    b = min(config.batch_writers, n_writers)
    history = []
    for _ in range(steps):
        writers = rng.choice(n_writers, size=b, replace=False)
        batch = np.stack(
            [glyphs_by_writer[w][rng.integers(0, len(glyphs_by_writer[w]))] for w in writers]
        )
        loss = multi_scale_contrastive_loss(encoder, Tensor(batch.astype(np.float32)), config, rng)
        loss.backward()
        opt.step(params)
        if weight_decay > 0.0:
            for p in params:
                p.tensor.data -= opt.learning_rate * weight_decay * p.tensor.data
        history.append(loss.item())
    return history
