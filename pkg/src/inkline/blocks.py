"""Layer wrappers and the residual dilated conv blocks shared by the models.

Down/up blocks follow the common recipe: three channel-preserving
residual units with kernel 3 and dilations 1/3/5, plus a stride-2
kernel-4 resampling conv that doubles (or halves) the channel count.
Activation is SiLU throughout; there are no normalization layers.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .nn import Parameter, Tensor


class Linear:
    def __init__(self, name: str, d_in: int, d_out: int, rng, bias: bool = True):
        self.w = Parameter(name + ".w", nn.uniform_fan_in(rng, (d_in, d_out), d_in))
        self.b = Parameter(name + ".b", Tensor(np.zeros(d_out, np.float32))) if bias else None

    def __call__(self, x) -> Tensor:
        y = nn.matmul(x, self.w.tensor)
        return y + self.b.tensor if self.b is not None else y

    def parameters(self) -> list[Parameter]:
        return [self.w] + ([self.b] if self.b is not None else [])


class Conv1d:
    def __init__(self, name, c_in, c_out, k, rng, stride=1, dilation=1, padding=0, bias=True):
        self.stride, self.dilation, self.padding = stride, dilation, padding
        self.w = Parameter(name + ".w", nn.uniform_fan_in(rng, (c_out, c_in, k), c_in * k))
        self.b = Parameter(name + ".b", Tensor(np.zeros((c_out, 1), np.float32))) if bias else None

    def __call__(self, x) -> Tensor:
        y = nn.conv1d(x, self.w.tensor, self.stride, self.dilation, self.padding)
        return y + self.b.tensor if self.b is not None else y

    def parameters(self) -> list[Parameter]:
        return [self.w] + ([self.b] if self.b is not None else [])


class ConvTranspose1d:
    def __init__(self, name, c_in, c_out, k, rng, stride=1, padding=0, bias=True):
        self.stride, self.padding = stride, padding
        self.w = Parameter(name + ".w", nn.uniform_fan_in(rng, (c_in, c_out, k), c_in * k))
        self.b = Parameter(name + ".b", Tensor(np.zeros((c_out, 1), np.float32))) if bias else None

    def __call__(self, x) -> Tensor:
        y = nn.conv_transpose1d(x, self.w.tensor, self.stride, self.padding)
        return y + self.b.tensor if self.b is not None else y

    def parameters(self) -> list[Parameter]:
        return [self.w] + ([self.b] if self.b is not None else [])


class ResidualUnit:
    """x + conv(silu(conv(x))), both convs k=3 at the unit's dilation.

    The exit conv starts at zero so deep residual stacks begin as the
    identity and activations stay bounded at init.
    """

    def __init__(self, name, channels, dilation, rng):
        self.conv1 = Conv1d(name + ".conv1", channels, channels, 3, rng, dilation=dilation, padding=dilation)
        self.conv2 = Conv1d(name + ".conv2", channels, channels, 3, rng, dilation=dilation, padding=dilation)
        self.conv2.w.tensor.data = np.zeros_like(self.conv2.w.data)

    def __call__(self, x) -> Tensor:
        return x + self.conv2(nn.silu(self.conv1(x)))

    def parameters(self):
        return self.conv1.parameters() + self.conv2.parameters()


class DownBlock:
    """Three residual dilated units, then a stride-2 k=4 conv doubling channels."""

    def __init__(self, name, c_in, c_out, rng):
        self.units = [ResidualUnit(f"{name}.res{i}", c_in, d, rng) for i, d in enumerate((1, 3, 5))]
        self.down = Conv1d(name + ".down", c_in, c_out, 4, rng, stride=2, padding=1)

    def __call__(self, x) -> Tensor:
        for u in self.units:
            x = u(x)
        return self.down(x)

    def parameters(self):
        out = []
        for u in self.units:
            out += u.parameters()
        return out + self.down.parameters()


class UpBlock:
    """Stride-2 k=4 deconv halving channels, then three residual dilated units."""

    def __init__(self, name, c_in, c_out, rng):
        self.up = ConvTranspose1d(name + ".up", c_in, c_out, 4, rng, stride=2, padding=1)
        self.units = [ResidualUnit(f"{name}.res{i}", c_out, d, rng) for i, d in enumerate((1, 3, 5))]

    def __call__(self, x) -> Tensor:
        x = self.up(x)
        for u in self.units:
            x = u(x)
        return x

    def parameters(self):
        out = self.up.parameters()
        for u in self.units:
            out += u.parameters()
        return out


class CrossAttention:
    """Single-head QKV cross-attention with residual add, on (B, C, L) features."""

    def __init__(self, name, dim, rng):
        self.wq = Linear(name + ".wq", dim, dim, rng, bias=False)
        self.wk = Linear(name + ".wk", dim, dim, rng, bias=False)
        self.wv = Linear(name + ".wv", dim, dim, rng, bias=False)
        self.wo = Linear(name + ".wo", dim, dim, rng, bias=False)
        # start as a pass-through so the residual stream is stable at init
        self.wo.w.tensor.data = np.zeros_like(self.wo.w.data)

    def __call__(self, x, context) -> Tensor:
        """``x`` is (B, C, L) channel-major; ``context`` is (B, L_ctx, C) time-major."""
        xt = nn.transpose(x, (0, 2, 1))
        attended = nn.scaled_dot_attention(self.wq(xt), self.wk(context), self.wv(context))
        return x + nn.transpose(self.wo(attended), (0, 2, 1))

    def parameters(self):
        return (
            self.wq.parameters() + self.wk.parameters() + self.wv.parameters() + self.wo.parameters()
        )
