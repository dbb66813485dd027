import numpy as np
import pytest

from inkline import nn
from inkline.blocks import Linear
from inkline.corpus import make_rng
from inkline.errors import NeedTwoWriters, SequenceTooShort, ShapeMismatch
from inkline.nn import Tensor
from inkline.style_encoder import (
    ContrastiveConfig,
    StyleEncoder,
    contrastive_loss_scale,
    multi_scale_contrastive_loss,
    sample_segments,
)

from conftest import cast_params, finite_difference_check


@pytest.fixture(scope="module")
def encoder():
    return StyleEncoder(base_channels=4, rng=make_rng(0))


def test_encode_shapes_l8(encoder):
    feats = encoder.encode(Tensor(np.zeros((8, 3), np.float32)))
    assert feats.f1.shape == (4, 8)
    assert feats.f2.shape == (2, 16)
    assert feats.f3.shape == (1, 32)


def test_encode_shapes_l64(encoder):
    feats = encoder.encode(Tensor(np.zeros((64, 3), np.float32)))
    assert feats.f1.shape == (32, 8)
    assert feats.f2.shape == (16, 16)
    assert feats.f3.shape == (8, 32)


def test_encode_channel_doubling_per_table(encoder):
    # base c -> outputs 2c / 4c / 8c at strides 2 / 4 / 8
    feats = encoder.encode(Tensor(np.zeros((16, 3), np.float32)))
    c = encoder.base_channels
    assert feats.f1.shape[1] == 2 * c
    assert feats.f2.shape[1] == 4 * c
    assert feats.f3.shape[1] == 8 * c


def test_encode_rejects_bad_length(encoder):
    with pytest.raises(ShapeMismatch):
        encoder.encode(Tensor(np.zeros((12, 3), np.float32)))
    with pytest.raises(ShapeMismatch):
        encoder.encode(Tensor(np.zeros((0, 3), np.float32)))


def test_encode_batch_independence(encoder, rng):
    batch = rng.standard_normal((3, 16, 3)).astype(np.float32)
    feats = encoder.encode(Tensor(batch))
    perm = [2, 0, 1]
    feats_p = encoder.encode(Tensor(batch[perm]))
    assert np.allclose(feats_p.f3.numpy(), feats.f3.numpy()[perm], atol=1e-6)


def test_sample_segments_unique_pair():
    f = Tensor(np.arange(2.0).reshape(2, 1))
    rng = make_rng(9)
    e, ep = sample_segments(f, 1, rng)
    vals = {float(e.numpy()[0, 0]), float(ep.numpy()[0, 0])}
    assert vals == {0.0, 1.0}


def test_sample_segments_always_disjoint(rng):
    f = Tensor(np.arange(20.0).reshape(20, 1))
    gen = make_rng(4)
    for _ in range(200):
        l = int(rng.integers(1, 10))
        e, ep = sample_segments(f, l, gen)
        i, j = int(e.numpy()[0, 0]), int(ep.numpy()[0, 0])
        assert abs(i - j) >= l


def test_sample_segments_uniform_over_ordered_pairs():
    f = Tensor(np.arange(4.0).reshape(4, 1))
    gen = make_rng(7)
    counts = {}
    n = 10_000
    for _ in range(n):
        e, ep = sample_segments(f, 1, gen)
        key = (int(e.numpy()[0, 0]), int(ep.numpy()[0, 0]))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 12
    p = 1 / 12
    sigma = np.sqrt(n * p * (1 - p))
    for key, c in counts.items():
        assert abs(c - n * p) < 3 * sigma, (key, c)


def test_sample_segments_too_short():
    with pytest.raises(SequenceTooShort):
        sample_segments(Tensor(np.zeros((3, 2))), 2, make_rng(0))


from oracles import contrastive_reference


def _projection(d, p, seed=3):
    proj = Linear("g", d, p, make_rng(seed), bias=False)
    return proj


def test_contrastive_two_writers_identical_segments_zero(rng):
    proj = _projection(5, 4)
    seg = Tensor(rng.standard_normal((3, 5)).astype(np.float32))
    loss = contrastive_loss_scale([(seg, seg), (seg, seg)], proj, tau=0.1)
    assert loss.item() == pytest.approx(0.0, abs=1e-6)


def test_contrastive_three_writers_identical_log2(rng):
    proj = _projection(5, 4)
    seg = Tensor(rng.standard_normal((3, 5)).astype(np.float32))
    loss = contrastive_loss_scale([(seg, seg)] * 3, proj, tau=0.1)
    assert loss.item() == pytest.approx(np.log(2.0), abs=1e-5)


def test_contrastive_matches_bruteforce(rng):
    proj = _projection(6, 5)
    w = proj.w.data.astype(np.float64)
    pairs_np = [
        (rng.standard_normal((4, 6)), rng.standard_normal((4, 6))) for _ in range(4)
    ]
    pairs = [(Tensor(a), Tensor(b)) for a, b in pairs_np]
    ours = contrastive_loss_scale(pairs, proj, tau=0.07).item()
    ref = contrastive_reference(pairs_np, w, tau=0.07)
    assert ours == pytest.approx(ref, abs=1e-6)


def test_contrastive_excludes_own_positive_from_denominator(rng):
    # make writer 0's own positive similarity huge; if it leaked into the
    # denominator the loss could not go negative
    proj = _projection(2, 2, seed=1)
    proj.w.tensor.data = np.eye(2, dtype=np.float32)
    big = Tensor(np.array([[10.0, 0.0]], np.float32))
    small = Tensor(np.array([[0.1, 0.0]], np.float32))
    loss = contrastive_loss_scale([(big, big), (small, small)], proj, tau=1.0)
    ref = contrastive_reference(
        [(big.numpy(), big.numpy()), (small.numpy(), small.numpy())], np.eye(2), tau=1.0
    )
    assert loss.item() == pytest.approx(ref, abs=1e-5)
    assert loss.item() < 0


def test_contrastive_needs_two_writers(rng):
    proj = _projection(3, 2)
    seg = Tensor(rng.standard_normal((2, 3)))
    with pytest.raises(NeedTwoWriters):
        contrastive_loss_scale([(seg, seg)], proj, tau=0.1)


def test_contrastive_permutation_invariant(rng):
    proj = _projection(4, 3)
    pairs = [
        (Tensor(rng.standard_normal((3, 4))), Tensor(rng.standard_normal((3, 4))))
        for _ in range(5)
    ]
    base = contrastive_loss_scale(pairs, proj, tau=0.2).item()
    perm = [pairs[i] for i in (3, 1, 4, 0, 2)]
    assert contrastive_loss_scale(perm, proj, tau=0.2).item() == pytest.approx(base, abs=1e-6)


def test_multi_scale_zero_weights(encoder, rng):
    batch = Tensor(rng.standard_normal((3, 16, 3)).astype(np.float32))
    cfg = ContrastiveConfig(weights=(0.0, 0.0, 0.0))
    assert multi_scale_contrastive_loss(encoder, batch, cfg, make_rng(1)).item() == 0.0


def test_multi_scale_single_lambda_linearity(encoder, rng):
    batch = Tensor(rng.standard_normal((3, 32, 3)).astype(np.float32))
    full = multi_scale_contrastive_loss(
        encoder, batch, ContrastiveConfig(weights=(0.0, 0.0, 1.0), segment_len=1), make_rng(5)
    ).item()
    scaled = multi_scale_contrastive_loss(
        encoder, batch, ContrastiveConfig(weights=(0.0, 0.0, 0.1), segment_len=1), make_rng(5)
    ).item()
    assert scaled == pytest.approx(0.1 * full, rel=1e-5)


def test_multi_scale_weighted_sum(encoder, rng):
    batch = Tensor(rng.standard_normal((4, 64, 3)).astype(np.float32))
    parts = []
    for s in range(3):
        weights = [0.0, 0.0, 0.0]
        weights[s] = 1.0
        parts.append(
            multi_scale_contrastive_loss(
                encoder, batch, ContrastiveConfig(weights=tuple(weights), segment_len=2), make_rng(11)
            ).item()
        )
    combined = multi_scale_contrastive_loss(
        encoder, batch, ContrastiveConfig(weights=(0.01, 0.1, 0.1), segment_len=2), make_rng(11)
    ).item()
    assert combined == pytest.approx(0.01 * parts[0] + 0.1 * parts[1] + 0.1 * parts[2], rel=1e-4)


def test_multi_scale_needs_two_writers(encoder, rng):
    with pytest.raises(NeedTwoWriters):
        multi_scale_contrastive_loss(
            encoder, Tensor(np.zeros((1, 16, 3), np.float32)), ContrastiveConfig(), make_rng(0)
        )


def test_gradient_through_encoder_and_loss(rng):
    enc = StyleEncoder(base_channels=2, rng=make_rng(3))
    cast_params(enc.parameters(), np.float64)
    batch = Tensor(rng.standard_normal((2, 16, 3)))
    cfg = ContrastiveConfig(weights=(0.01, 0.1, 0.1), segment_len=1)
    params = [enc.stem.w.tensor, enc.block2.down.w.tensor, enc.proj[2].w.tensor,
              enc.block1.units[0].conv1.w.tensor]

    def build():
        return multi_scale_contrastive_loss(enc, batch, cfg, make_rng(21))

    err = finite_difference_check(build, params, rng, h=1e-6, samples=5)
    assert err < 1e-3
