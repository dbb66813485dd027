"""Conditional DDPM glyph synthesizer.

The denoiser is a 1D U-Net whose input rows concatenate the noisy
trajectory point, a sinusoidal time embedding, and the character's
learned content code. Decoder features cross-attend to the style
encoder's feature sequence of matching stride before each up block, and
each up block's output receives an additive skip from the encoder
feature of the same shape.

Diffusion runs in a per-channel standardized trajectory space; generated
points are de-standardized, the pen channel is binarized, trailing pad
is stripped, and the glyph is height-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .blocks import Conv1d, CrossAttention, ResidualUnit, UpBlock, DownBlock
from .errors import (
    EmptyDataset,
    InvalidSchedule,
    InvalidTimestep,
    ShapeMismatch,
    UnknownCategory,
)
from .nn import Parameter, Tensor
from .style_encoder import ContrastiveConfig, MultiScaleFeatures, StyleEncoder, multi_scale_contrastive_loss
from .trajectory import Glyph, binarize_pen_state, normalize_height
from .errors import DegenerateExtent, EmptyTrajectory


@dataclass
class NoiseSchedule:
    """Per-step retention factors alpha and running products alpha_bar.

    ``alpha[t - 1]`` is the factor for step t in 1..T; ``alpha_bar[t]``
    is the product over steps 1..t with ``alpha_bar[0] = 1``.
    """

    T: int
    alpha: np.ndarray
    alpha_bar: np.ndarray


def linear_schedule(T: int = 1000, alpha_first: float = 1 - 1e-4, alpha_last: float = 1 - 2e-2) -> NoiseSchedule:
    """Alpha linear between the endpoints; the defaults keep alpha_bar[T] below 1e-4."""
    if T < 1:
        raise InvalidSchedule(f"T must be >= 1, got {T}")
    if not (0.0 < alpha_first < 1.0 and 0.0 < alpha_last < 1.0):
        raise InvalidSchedule("schedule endpoints must lie in (0, 1)")
    alpha = np.linspace(alpha_first, alpha_last, T)
    alpha_bar = np.concatenate([[1.0], np.cumprod(alpha)])
    return NoiseSchedule(T=T, alpha=alpha, alpha_bar=alpha_bar)


def _check_t(t: int, T: int):
    if not (1 <= t <= T):
        raise InvalidTimestep(f"t must be in [1, {T}], got {t}")


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Forward-noise x0 to step t: sqrt(a_bar_t) x0 + sqrt(1 - a_bar_t) eps."""
    _check_t(t, schedule.T)
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def reverse_step(x_t: np.ndarray, t: int, eps_theta: np.ndarray, schedule: NoiseSchedule,
                 z: np.ndarray | None = None) -> np.ndarray:
    """One ancestral sampling step x_t -> x_{t-1}; z is forced to 0 at t = 1."""
    _check_t(t, schedule.T)
    a = schedule.alpha[t - 1]
    ab = schedule.alpha_bar[t]
    ab_prev = schedule.alpha_bar[t - 1]
    mu = x_t / np.sqrt(a) - (1.0 - a) / (np.sqrt(1.0 - ab) * np.sqrt(a)) * eps_theta
    if t == 1 or z is None:
        return mu
    sigma = np.sqrt((1.0 - a) * (1.0 - ab_prev) / (1.0 - ab))
    return mu + sigma * z


def ancestral_sample(eps_fn, x_T: np.ndarray, schedule: NoiseSchedule,
                     rng: np.random.Generator | None) -> np.ndarray:
    """Run the full reverse chain from x_T; ``rng=None`` forces z = 0 at every step."""
    x = x_T
    for t in range(schedule.T, 0, -1):
        eps = eps_fn(x, t)
        z = rng.standard_normal(x.shape) if (rng is not None and t > 1) else None
        x = reverse_step(x, t, eps, schedule, z)
    return x


def sinusoidal_time_embedding(t: int, dim: int = 32) -> np.ndarray:
    """Standard sin/cos position encoding of an integer step; values in [-1, 1]."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    angles = t * freqs
    emb = np.empty(dim, dtype=np.float64)
    emb[0::2] = np.sin(angles)
    emb[1::2] = np.cos(angles)
    return emb


@dataclass
class TrajectoryStandardizer:
    """Per-channel affine map applied to every trajectory entering the models."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    std: np.ndarray = field(default_factory=lambda: np.ones(3))

    @staticmethod
    def fit(points: np.ndarray) -> "TrajectoryStandardizer":
        flat = points.reshape(-1, 3)
        std = flat.std(axis=0)
        return TrajectoryStandardizer(flat.mean(axis=0), np.maximum(std, 1e-6))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.mean) / self.std

    def invert(self, pts: np.ndarray) -> np.ndarray:
        return pts * self.std + self.mean


class UNetDenoiser:
    """Three down blocks, a residual bottleneck, and three cross-attended up blocks."""

    def __init__(self, base_channels: int, in_channels: int, rng: np.random.Generator,
                 name: str = "font.unet"):
        c = base_channels
        self.stem = Conv1d(name + ".stem", in_channels, c, 1, rng)
        self.en1 = DownBlock(name + ".en1", c, 2 * c, rng)
        self.en2 = DownBlock(name + ".en2", 2 * c, 4 * c, rng)
        self.en3 = DownBlock(name + ".en3", 4 * c, 8 * c, rng)
        self.mid = ResidualUnit(name + ".mid", 8 * c, 1, rng)
        self.attn3 = CrossAttention(name + ".attn3", 8 * c, rng)
        self.de3 = UpBlock(name + ".de3", 8 * c, 4 * c, rng)
        self.attn2 = CrossAttention(name + ".attn2", 4 * c, rng)
        self.de2 = UpBlock(name + ".de2", 4 * c, 2 * c, rng)
        self.attn1 = CrossAttention(name + ".attn1", 2 * c, rng)
        self.de1 = UpBlock(name + ".de1", 2 * c, c, rng)
        self.out = Conv1d(name + ".out", c, 3, 1, rng)
        # zero noise prediction at init, so the initial loss sits near 1
        self.out.w.tensor.data = np.zeros_like(self.out.w.data)

    def parameters(self) -> list[Parameter]:
        out = []
        for block in (self.stem, self.en1, self.en2, self.en3, self.mid, self.attn3,
                      self.de3, self.attn2, self.de2, self.attn1, self.de1, self.out):
            out += block.parameters()
        return out

    def __call__(self, x_in, style: MultiScaleFeatures) -> Tensor:
        """``x_in`` is (B, n, C_in) time-major; returns (B, n, 3)."""
        x_in = nn.as_tensor(x_in)
        squeeze = x_in.ndim == 2
        if squeeze:
            x_in = x_in.reshape((1,) + x_in.shape)
        n = x_in.shape[1]
        if n < 8 or n % 8 != 0:
            raise ShapeMismatch(f"trajectory length {n} must be a positive multiple of 8")
        f1, f2, f3 = style.f1, style.f2, style.f3
        if f1.ndim == 2:
            f1, f2, f3 = (t.reshape((1,) + t.shape) for t in (f1, f2, f3))
        h0 = self.stem(nn.transpose(x_in, (0, 2, 1)))
        h1 = self.en1(h0)
        h2 = self.en2(h1)
        h3 = self.en3(h2)
        z = self.mid(h3)
        z = self.de3(self.attn3(z, f3)) + h2
        z = self.de2(self.attn2(z, f2)) + h1
        z = self.de1(self.attn1(z, f1)) + h0
        y = nn.transpose(self.out(z), (0, 2, 1))
        return y.reshape(y.shape[1:]) if squeeze else y


class FontSynthesizer:
    """Character embedding dictionary + style encoder + U-Net denoiser."""

    def __init__(self, n_categories: int, base_channels: int, rng: np.random.Generator,
                 char_dim: int = 150, time_dim: int = 32, n_max: int = 120):
        self.n_categories = n_categories
        self.base_channels = base_channels
        self.char_dim = char_dim
        self.time_dim = time_dim
        self.n_max = n_max
        self.n_pad = ((n_max + 7) // 8) * 8
        self.char_embedding = Parameter(
            "font.char_embedding",
            Tensor(rng.normal(0.0, 0.5, size=(n_categories, char_dim)).astype(np.float32)),
        )
        self.encoder = StyleEncoder(base_channels, rng, name="style")
        self.unet = UNetDenoiser(base_channels, 3 + time_dim + char_dim, rng, name="font.unet")
        self.standardizer = TrajectoryStandardizer()
        self.dtype = np.float32  # tests switch to float64 for gradient oracles

    def parameters(self) -> list[Parameter]:
        return [self.char_embedding] + self.encoder.parameters() + self.unet.parameters()

    def _check_category(self, k: int):
        if not (0 <= k < self.n_categories):
            raise UnknownCategory(f"category {k} outside [0, {self.n_categories})")

    def assemble_input(self, x_t: np.ndarray, t: int, k: int) -> Tensor:
        """Rows of concat(x_t[i], time embedding, content code); shape (n, 3+32+150)."""
        self._check_category(k)
        n = len(x_t)
        emb_t = np.tile(sinusoidal_time_embedding(t, self.time_dim), (n, 1))
        ones = Tensor(np.ones((n, 1), dtype=self.dtype))
        code = nn.matmul(ones, self.char_embedding.tensor[int(k)].reshape(1, self.char_dim))
        return nn.concat(
            [Tensor(x_t.astype(self.dtype)), Tensor(emb_t.astype(self.dtype)), code], axis=1
        )

    def _assemble_batch(self, x_t: np.ndarray, ts: np.ndarray, ks: np.ndarray) -> Tensor:
        B, n, _ = x_t.shape
        emb = np.stack([np.tile(sinusoidal_time_embedding(int(t), self.time_dim), (n, 1)) for t in ts])
        codes = self.char_embedding.tensor[np.asarray(ks, dtype=np.int64)]
        codes = codes.reshape(B, 1, self.char_dim) + Tensor(np.zeros((B, n, self.char_dim), self.dtype))
        return nn.concat(
            [Tensor(x_t.astype(self.dtype)), Tensor(emb.astype(self.dtype)), codes], axis=2
        )

    def encode_style(self, reference_std: np.ndarray) -> MultiScaleFeatures:
        """Encode an already-standardized reference trajectory (L, 3) or (B, L, 3)."""
        return self.encoder.encode(Tensor(reference_std.astype(self.dtype)))

    def predict_noise(self, x_in, style: MultiScaleFeatures) -> Tensor:
        return self.unet(x_in, style)


def reconstruction_loss(
    synth: FontSynthesizer,
    x0: np.ndarray,
    reference: np.ndarray,
    k: int,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    denoiser=None,
) -> Tensor:
    """Single-sample diffusion reconstruction loss (mean-squared convention).

    ``x0`` (n, 3) and ``reference`` (L, 3) are raw trajectories; the
    synthesizer's standardizer is applied here. ``denoiser`` can replace
    the U-Net to make the loss testable against stubs.
    """
    synth._check_category(k)
    x0s = synth.standardizer.apply(x0)
    refs = synth.standardizer.apply(reference)
    t = int(rng.integers(1, schedule.T + 1))
    eps = rng.standard_normal(x0s.shape)
    x_t = q_sample(x0s, t, eps, schedule)
    x_in = synth.assemble_input(x_t, t, k)
    style = synth.encode_style(refs)
    predict = denoiser if denoiser is not None else synth.predict_noise
    eps_theta = predict(x_in, style)
    return nn.mse_loss(eps_theta, eps.astype(synth.dtype))


def generate(
    synth: FontSynthesizer,
    k: int,
    reference: np.ndarray,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    strip_tol: float = 0.02,
) -> Glyph:
    """Sample one glyph of category ``k`` in the reference's calligraphy style.

    Runs the full reverse chain from Gaussian noise, de-standardizes,
    binarizes pen states, strips the trailing pad (near-zero movement
    with pen up), and height-normalizes the result.
    """
    synth._check_category(k)
    with nn.no_grad():
        style = synth.encode_style(synth.standardizer.apply(reference))

        def eps_fn(x, t):
            return synth.predict_noise(synth.assemble_input(x, t, k), style).numpy().astype(np.float64)

        x_T = rng.standard_normal((synth.n_pad, 3))
        x0 = ancestral_sample(eps_fn, x_T, schedule, rng)
    pts = synth.standardizer.invert(x0)
    pts[:, 2] = np.where(pts[:, 2] > 0, 1.0, -1.0)
    end = len(pts)
    while end > 1 and pts[end - 1, 2] < 0 and abs(pts[end - 1, 0]) < strip_tol and abs(pts[end - 1, 1]) < strip_tol:
        end -= 1
    glyph = Glyph(pts[:end], k)
    try:
        return normalize_height(glyph, fallback_to_width=True)
    except (DegenerateExtent, EmptyTrajectory):
        return glyph


def _pad_trajectory(points: np.ndarray, n: int) -> np.ndarray:
    if len(points) >= n:
        return points[:n]
    pad = np.tile(np.array([0.0, 0.0, -1.0]), (n - len(points), 1))
    return np.concatenate([points, pad], axis=0)


def train_font(
    synth: FontSynthesizer,
    examples: list,
    references: list[np.ndarray],
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    *,
    steps: int,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    clip_norm: float = 1.0,
    decay_per_batch: float = 0.9998,
    contrastive: ContrastiveConfig | None = None,
    optimizer: nn.AdamState | None = None,
    callback=None,
) -> list[tuple[float, float]]:
    """Joint training: reconstruction loss plus the multi-scale contrastive loss.

    ``examples`` are :class:`~inkline.pipeline.FontExample`s (glyphs
    padded to ``synth.n_pad``); ``references[i]`` is the reference
    trajectory for record i. With fewer than two writers the contrastive
    term is skipped. Returns (reconstruction, contrastive) loss history.
    """
    if not examples:
        raise EmptyDataset("no training glyphs")
    stacked = np.stack([ex.x0 for ex in examples])
    synth.standardizer = TrajectoryStandardizer.fit(stacked)
    x0_std = synth.standardizer.apply(stacked).astype(np.float32)
    refs_std = [synth.standardizer.apply(r).astype(np.float32) for r in references]

    writers = sorted({ex.writer for ex in examples})
    by_writer = {w: [i for i, ex in enumerate(examples) if ex.writer == w] for w in writers}
    multi_writer = len(writers) >= 2 and contrastive is not None

    # the contrastive projections receive gradients only in multi-writer runs
    params = [synth.char_embedding] + synth.encoder.trunk_parameters() + synth.unet.parameters()
    if multi_writer:
        for proj in synth.encoder.proj:
            params += proj.parameters()
    opt = optimizer or nn.AdamState(params, learning_rate, clip_norm=clip_norm, decay_per_batch=decay_per_batch)
    history = []
    for step in range(steps):
        if multi_writer:
            b = min(contrastive.batch_writers, len(writers))
            chosen = rng.choice(len(writers), size=b, replace=False)
            idx = np.array([by_writer[writers[w]][rng.integers(0, len(by_writer[writers[w]]))] for w in chosen])
        else:
            take_n = min(batch_size, len(examples))
            idx = rng.choice(len(examples), size=take_n, replace=False)
        batch_x0 = x0_std[idx]
        ks = np.array([examples[i].category for i in idx])
        rec_ids = [examples[i].record_index for i in idx]
        unique_recs = sorted(set(rec_ids))
        ref_pos = {r: i for i, r in enumerate(unique_recs)}
        ref_lens = {len(refs_std[r]) for r in unique_recs}
        if len(ref_lens) != 1:
            raise ShapeMismatch("references must share one padded length")
        ref_batch = np.stack([refs_std[r] for r in unique_recs])

        ts = rng.integers(1, schedule.T + 1, size=len(idx))
        eps = rng.standard_normal(batch_x0.shape)
        ab = schedule.alpha_bar[ts][:, None, None]
        x_t = np.sqrt(ab) * batch_x0 + np.sqrt(1.0 - ab) * eps
        x_in = synth._assemble_batch(x_t, ts, ks)
        style_all = synth.encode_style(ref_batch)
        sel = np.array([ref_pos[r] for r in rec_ids])
        style = MultiScaleFeatures(style_all.f1[sel], style_all.f2[sel], style_all.f3[sel])
        eps_theta = synth.predict_noise(x_in, style)
        loss_r = nn.mse_loss(eps_theta, eps.astype(np.float32))

        loss_c_val = 0.0
        if multi_writer:
            loss_c = multi_scale_contrastive_loss(synth.encoder, Tensor(batch_x0), contrastive, rng)
            loss_c_val = loss_c.item()
            total = loss_r + loss_c
        else:
            total = loss_r
        total.backward()
        opt.step(params)
        history.append((loss_r.item(), loss_c_val))
        if callback is not None:
            callback(step, history[-1])
    return history
