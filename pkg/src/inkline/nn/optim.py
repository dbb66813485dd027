"""Named parameters and the Adam optimizer with global-norm clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import MissingGradient
from .tensor import Tensor


@dataclass
class Parameter:
    """A named, trainable tensor; names double as checkpoint keys."""

    name: str
    tensor: Tensor

    def __post_init__(self):
        self.tensor.requires_grad = True

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> Tensor:
    """Kaiming-style uniform init: U(-sqrt(3/fan_in), sqrt(3/fan_in))."""
    bound = math.sqrt(3.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype))


def uniform_recurrent(rng: np.random.Generator, shape, hidden: int, dtype=np.float32) -> Tensor:
    """Plain uniform U(-1/sqrt(H), 1/sqrt(H)) for recurrent weights."""
    bound = 1.0 / math.sqrt(hidden)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype))


class AdamState:
    """Adam with optional global-norm gradient clipping and per-step lr decay.

    ``step`` clips the global gradient norm to ``clip_norm``, applies the
    bias-corrected Adam update (beta1 0.9, beta2 0.999, eps 1e-8), decays
    the learning rate, and clears gradients.
    """

    def __init__(
        self,
        params: list[Parameter],
        learning_rate: float,
        clip_norm: float = math.inf,
        decay_per_batch: float = 1.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm
        self.decay_per_batch = decay_per_batch
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.data) for p in params}
        self.v = {p.name: np.zeros_like(p.data) for p in params}

    def step(self, params: list[Parameter]):
        for p in params:
            if p.grad is None:
                raise MissingGradient(f"parameter {p.name!r} has no gradient")
        total_sq = sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params)
        norm = math.sqrt(total_sq)
        scale = self.clip_norm / norm if math.isfinite(self.clip_norm) and norm > self.clip_norm else 1.0
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for p in params:
            g = p.grad * scale if scale != 1.0 else p.grad
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.tensor.data = p.tensor.data - self.learning_rate * update.astype(p.data.dtype)
            p.tensor.grad = None
        self.learning_rate *= self.decay_per_batch


def adam_step(state: AdamState, params: list[Parameter]):
    """Functional alias for :meth:`AdamState.step`."""
    state.step(params)
