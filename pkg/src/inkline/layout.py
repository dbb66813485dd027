"""In-context autoregressive layout generator and the Gaussian baseline.

The generator is a 2-layer LSTM (hidden 128) fed with the previous box
and the current category's embedding. Box components are mapped to an
unconstrained space before standardization (softplus preimage for height
and width, identity for cy and dx), so the network trains on a
stabilized l1 objective while emitted heights and widths stay positive
through the softplus in the decode path.

In-context generation feeds a reference line's true boxes as a prefix
(outputs during the prefix are discarded); the recurrent state then
carries the layout style into autoregressive continuation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .blocks import Linear
from .errors import EmptyDataset, ShapeMismatch, UnknownCategory
from .nn import Parameter, Tensor
from .trajectory import BoundingBox, Layout


def softplus_inv(x: np.ndarray) -> np.ndarray:
    """Inverse of log(1 + exp(.)) for positive inputs, stable for large x."""
    x = np.asarray(x, dtype=np.float64)
    small = np.clip(x, 1e-12, 30.0)
    return np.where(x > 30.0, x, np.log(np.expm1(small)))


def softplus_np(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


@dataclass
class BoxCodec:
    """Affine standardization of boxes in (softplus-preimage h, w, cy, dx) space."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(4))
    std: np.ndarray = field(default_factory=lambda: np.ones(4))

    @staticmethod
    def fit(boxes: np.ndarray) -> "BoxCodec":
        t = BoxCodec._transform(boxes)
        return BoxCodec(t.mean(axis=0), np.maximum(t.std(axis=0), 1e-6))

    @staticmethod
    def _transform(boxes: np.ndarray) -> np.ndarray:
        t = np.asarray(boxes, dtype=np.float64).copy()
        t[..., 0] = softplus_inv(t[..., 0])
        t[..., 1] = softplus_inv(t[..., 1])
        return t

    def encode(self, boxes: np.ndarray) -> np.ndarray:
        return (self._transform(boxes) - self.mean) / self.std

    def decode(self, y: np.ndarray) -> np.ndarray:
        u = np.asarray(y, dtype=np.float64) * self.std + self.mean
        out = u.copy()
        out[..., 0] = softplus_np(u[..., 0])
        out[..., 1] = softplus_np(u[..., 1])
        return out


class LayoutModel:
    """Category embedding + 2-layer LSTM (hidden 128) + linear head to 4 box values."""

    HIDDEN = 128
    D_CAT = 64

    def __init__(self, n_categories: int, rng: np.random.Generator):
        self.n_categories = n_categories
        H, D = self.HIDDEN, 4 + self.D_CAT
        self.embedding = Parameter(
            "layout.embedding", Tensor(rng.normal(0.0, 0.5, size=(n_categories, self.D_CAT)).astype(np.float32))
        )
        self.cells = []
        for i, d_in in enumerate((D, H)):
            w_ih = Parameter(f"layout.lstm{i}.w_ih", nn.uniform_recurrent(rng, (4 * H, d_in), H))
            w_hh = Parameter(f"layout.lstm{i}.w_hh", nn.uniform_recurrent(rng, (4 * H, H), H))
            bias = np.zeros(4 * H, np.float32)
            bias[H : 2 * H] = 1.0  # forget gate opens at init
            b = Parameter(f"layout.lstm{i}.b", Tensor(bias))
            self.cells.append((w_ih, w_hh, b))
        self.head = Linear("layout.head", H, 4, rng)
        self.codec = BoxCodec()

    def parameters(self) -> list[Parameter]:
        out = [self.embedding]
        for w_ih, w_hh, b in self.cells:
            out += [w_ih, w_hh, b]
        return out + self.head.parameters()

    def init_state(self, batch: int = 1):
        H = self.HIDDEN
        return [
            (Tensor(np.zeros((batch, H), np.float32)), Tensor(np.zeros((batch, H), np.float32)))
            for _ in self.cells
        ]

    def _check_categories(self, cats) -> np.ndarray:
        cats = np.asarray(cats, dtype=np.int64)
        if cats.size and (cats.min() < 0 or cats.max() >= self.n_categories):
            raise UnknownCategory(f"category outside [0, {self.n_categories})")
        return cats

    def forward_step(self, y_in: Tensor, categories, state):
        """One step on encoded boxes: (B, 4) + embeddings -> (B, 4) prediction."""
        cats = self._check_categories(categories)
        emb = self.embedding.tensor[cats]
        x = nn.concat([y_in, emb], axis=1)
        new_state = []
        for (w_ih, w_hh, b), (h, c) in zip(self.cells, state):
            h, c = nn.lstm_step(x, h, c, w_ih.tensor, w_hh.tensor, b.tensor)
            new_state.append((h, c))
            x = h
        return self.head(x), new_state

    def step(self, prev_box: BoundingBox | None, category: int, state=None):
        """Spec surface: one raw-box step; returns (BoundingBox, state)."""
        if state is None:
            state = self.init_state(1)
        y_in = (
            self.codec.encode(prev_box.as_array()).reshape(1, 4)
            if prev_box is not None
            else np.zeros((1, 4))
        )
        with nn.no_grad():
            y, state = self.forward_step(Tensor(y_in.astype(np.float32)), [category], state)
        box = BoundingBox.from_array(self.codec.decode(y.numpy()[0]))
        return box, state


def layout_training_set(lines: list[tuple[np.ndarray, np.ndarray]]) -> list[tuple[np.ndarray, np.ndarray]]:
    """Filter (categories, boxes) pairs to lines with at least 2 glyphs."""
    return [(c, b) for c, b in lines if len(c) >= 2]


def train_teacher_forcing(
    model: LayoutModel,
    lines: list[tuple[np.ndarray, np.ndarray]],
    rng: np.random.Generator,
    *,
    steps: int = 2000,
    batch_size: int = 32,
    learning_rate: float = 0.01,
    optimizer: nn.AdamState | None = None,
    callback=None,
) -> list[float]:
    """Teacher-forced l1 training on (categories, raw boxes) lines.

    Ground-truth boxes are always fed as inputs; the loss is the mean l1
    distance in encoded box space over all valid steps of the batch.
    """
    lines = layout_training_set(lines)
    if not lines:
        raise EmptyDataset("no usable lines (need >= 2 glyphs each)")
    model.codec = BoxCodec.fit(np.concatenate([b for _, b in lines], axis=0))
    encoded = [(np.asarray(c, dtype=np.int64), model.codec.encode(b)) for c, b in lines]

    params = model.parameters()
    opt = optimizer or nn.AdamState(params, learning_rate)
    history = []
    for step in range(steps):
        picks = rng.choice(len(encoded), size=min(batch_size, len(encoded)), replace=len(encoded) < batch_size)
        batch = [encoded[i] for i in picks]
        T = max(len(c) for c, _ in batch)
        B = len(batch)
        cats = np.zeros((B, T), np.int64)
        targets = np.zeros((B, T, 4), np.float64)
        mask = np.zeros((B, T, 1), np.float32)
        for i, (c, y) in enumerate(batch):
            m = len(c)
            cats[i, :m] = c
            targets[i, :m] = y
            mask[i, :m] = 1.0
        state = model.init_state(B)
        preds = []
        for t in range(T):
            y_in = np.zeros((B, 4), np.float32) if t == 0 else targets[:, t - 1].astype(np.float32)
            y, state = model.forward_step(Tensor(y_in), cats[:, t], state)
            preds.append(y.reshape(B, 1, 4))
        pred = nn.concat(preds, axis=1)
        diff = nn.abs_(pred - Tensor(targets.astype(np.float32))) * Tensor(mask)
        loss = nn.sum_(diff) / float(mask.sum() * 4)
        loss.backward()
        opt.step(params)
        history.append(loss.item())
        if callback is not None:
            callback(step, history[-1])
    return history


def generate_in_context(
    model: LayoutModel,
    prefix_boxes: list[BoundingBox],
    prefix_categories: list[int],
    target_categories: list[int],
) -> Layout:
    """Feed true prefix boxes, then continue autoregressively; deterministic."""
    if len(prefix_boxes) != len(prefix_categories):
        raise ShapeMismatch(
            f"prefix boxes ({len(prefix_boxes)}) vs categories ({len(prefix_categories)})"
        )
    model._check_categories(list(prefix_categories) + list(target_categories))
    state = model.init_state(1)
    prev: BoundingBox | None = None
    with nn.no_grad():
        for box, cat in zip(prefix_boxes, prefix_categories):
            _, state = model.step(prev, cat, state)
            prev = box
        out = []
        for cat in target_categories:
            prev, state = model.step(prev, cat, state)
            out.append(prev)
    return Layout(out)


def generate_unconditional(model: LayoutModel, target_categories: list[int]) -> Layout:
    """In-context generation with an empty prefix."""
    return generate_in_context(model, [], [], target_categories)


@dataclass
class CategoryBoxStats:
    """Per-category Gaussian box statistics with a global fallback."""

    means: dict[int, np.ndarray]
    variances: dict[int, np.ndarray]
    global_mean: np.ndarray
    global_var: np.ndarray

    def lookup(self, category: int) -> tuple[np.ndarray, np.ndarray]:
        if category in self.means:
            return self.means[category], self.variances[category]
        return self.global_mean, self.global_var


def gaussian_fit(lines: list[tuple[np.ndarray, np.ndarray]]) -> CategoryBoxStats:
    """Fit independent per-category Gaussians over raw boxes.

    Categories seen fewer than twice fall back to the global statistics.
    """
    if not lines:
        raise EmptyDataset("gaussian_fit needs at least one line")
    all_boxes = np.concatenate([b for _, b in lines], axis=0)
    by_cat: dict[int, list[np.ndarray]] = {}
    for cats, boxes in lines:
        for c, b in zip(cats, boxes):
            by_cat.setdefault(int(c), []).append(np.asarray(b, dtype=np.float64))
    means, variances = {}, {}
    for c, rows in by_cat.items():
        if len(rows) >= 2:
            arr = np.stack(rows)
            means[c] = arr.mean(axis=0)
            variances[c] = arr.var(axis=0)
    return CategoryBoxStats(means, variances, all_boxes.mean(axis=0), all_boxes.var(axis=0))


def gaussian_sample(stats: CategoryBoxStats, categories: list[int], rng) -> Layout:
    """Sample each box independently from its category's Gaussian; h, w clamped."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(rng))))
    boxes = []
    for c in categories:
        mean, var = stats.lookup(int(c))
        v = rng.normal(mean, np.sqrt(np.maximum(var, 0.0)))
        v[0] = max(v[0], 1e-3)
        v[1] = max(v[1], 1e-3)
        boxes.append(BoundingBox.from_array(v))
    return Layout(boxes)
