"""Structured ops: 1D convolutions, LSTM cell, scaled dot-product attention.

Convolutions accept (C, L) or batched (B, C, L) inputs; the batched path
is what the trainers use. All ops are differentiable through the tape in
:mod:`.tensor`.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_tensor, matmul, mul, sigmoid, softmax, tanh, transpose


def conv_out_len(length: int, k: int, stride: int, dilation: int, padding: int) -> int:
    return (length + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 2:
        return x.reshape((1,) + x.shape), True
    if x.ndim == 3:
        return x, False
    raise ShapeMismatch(f"expected (C, L) or (B, C, L), got {x.shape}")


def conv1d(x, w, stride: int = 1, dilation: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x`` (C_in, L) with ``w`` (C_out, C_in, k)."""
    x, w = as_tensor(x), as_tensor(w)
    xb, squeeze = _batched(x)
    B, C, L = xb.shape
    C_out, C_in, k = w.shape
    if C != C_in:
        raise ShapeMismatch(f"conv1d channels: input {C} vs weight {C_in}")
    L_out = conv_out_len(L, k, stride, dilation, padding)
    if L_out < 1:
        raise ShapeMismatch(f"conv1d output length {L_out} < 1 for input length {L}")

    xd = xb.data
    if padding > 0:
        xd = np.pad(xd, ((0, 0), (0, 0), (padding, padding)))
    tap_idx = (np.arange(k) * dilation)[:, None] + (np.arange(L_out) * stride)[None, :]
    cols = xd[:, :, tap_idx].reshape(B, C_in * k, L_out)
    w2 = w.data.reshape(C_out, C_in * k)
    out_data = np.matmul(w2, cols)

    def backward(g):
        g = g.reshape(B, C_out, L_out)
        if w.requires_grad:
            dw = np.einsum("bol,bml->om", g, cols)
            w._accumulate(dw.reshape(w.shape))
        if xb.requires_grad:
            dcols = np.matmul(w2.T, g).reshape(B, C_in, k, L_out)
            dxp = np.zeros((B, C, L + 2 * padding), dtype=g.dtype)
            for kk in range(k):
                start = kk * dilation
                dxp[:, :, start : start + stride * L_out : stride] += dcols[:, :, kk, :]
            xb._accumulate(dxp[:, :, padding : padding + L])

    out = Tensor.from_op(out_data, (xb, w), backward)
    return out.reshape((C_out, L_out)) if squeeze else out


def conv_transpose1d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """Fractionally-strided adjoint of conv1d.

    ``x`` is (C_in, L), ``w`` is (C_in, C_out, k); with stride 2, k = 4,
    padding 1 the output length is exactly 2L. Satisfies
    ``<conv1d(a, w), y> == <a, conv_transpose1d(y, w)>`` when ``w``'s
    first two axes are read as conv1d's (C_out, C_in).
    """
    x, w = as_tensor(x), as_tensor(w)
    xb, squeeze = _batched(x)
    B, C, L = xb.shape
    C_in, C_out, k = w.shape
    if C != C_in:
        raise ShapeMismatch(f"conv_transpose1d channels: input {C} vs weight {C_in}")
    L_full = (L - 1) * stride + k
    L_out = L_full - 2 * padding
    if L_out < 1:
        raise ShapeMismatch(f"conv_transpose1d output length {L_out} < 1")

    w2 = w.data.reshape(C_in, C_out * k)
    tmp = np.matmul(w2.T, xb.data)  # (B, C_out*k, L)
    tmp = tmp.reshape(B, C_out, k, L)
    full = np.zeros((B, C_out, L_full), dtype=tmp.dtype)
    for kk in range(k):
        full[:, :, kk : kk + stride * L : stride] += tmp[:, :, kk, :]
    out_data = full[:, :, padding : padding + L_out]

    def backward(g):
        g = g.reshape(B, C_out, L_out)
        gf = np.zeros((B, C_out, L_full), dtype=g.dtype)
        gf[:, :, padding : padding + L_out] = g
        dtmp = np.empty((B, C_out, k, L), dtype=g.dtype)
        for kk in range(k):
            dtmp[:, :, kk, :] = gf[:, :, kk : kk + stride * L : stride]
        dtmp = dtmp.reshape(B, C_out * k, L)
        if w.requires_grad:
            dw = np.einsum("bcl,bml->cm", xb.data, dtmp)
            w._accumulate(dw.reshape(w.shape))
        if xb.requires_grad:
            xb._accumulate(np.matmul(w2, dtmp))

    out = Tensor.from_op(out_data, (xb, w), backward)
    return out.reshape((C_out, L_out)) if squeeze else out


def lstm_step(x, h_prev, c_prev, w_ih, w_hh, b) -> tuple[Tensor, Tensor]:
    """One LSTM cell step; gate layout is [input, forget, candidate, output].

    ``x`` is (D,) or (B, D); ``w_ih`` is (4H, D), ``w_hh`` is (4H, H),
    ``b`` is (4H,). Returns (h, c) with hidden size H.
    """
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    w_ih, w_hh, b = as_tensor(w_ih), as_tensor(w_hh), as_tensor(b)
    H4, D = w_ih.shape
    H = H4 // 4
    if w_hh.shape != (H4, H) or x.shape[-1] != D or h_prev.shape[-1] != H:
        raise ShapeMismatch(
            f"lstm_step shapes: x {x.shape}, h {h_prev.shape}, w_ih {w_ih.shape}, w_hh {w_hh.shape}"
        )
    gates = matmul(x, transpose(w_ih)) + matmul(h_prev, transpose(w_hh)) + b
    cut = (slice(None),) * (gates.ndim - 1)
    i = sigmoid(gates[cut + (slice(0, H),)])
    f = sigmoid(gates[cut + (slice(H, 2 * H),)])
    g = tanh(gates[cut + (slice(2 * H, 3 * H),)])
    o = sigmoid(gates[cut + (slice(3 * H, 4 * H),)])
    c = f * c_prev + i * g
    h = o * tanh(c)
    return h, c


def scaled_dot_attention(q, k, v) -> Tensor:
    """softmax(q k^T / sqrt(d)) v over the last two axes; single head."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    d = q.shape[-1]
    if k.shape[-1] != d or v.shape[-2] != k.shape[-2]:
        raise ShapeMismatch(f"attention shapes: q {q.shape}, k {k.shape}, v {v.shape}")
    axes = list(range(k.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    scores = mul(matmul(q, transpose(k, tuple(axes))), 1.0 / math.sqrt(d))
    return matmul(softmax(scores, axis=-1), v)
