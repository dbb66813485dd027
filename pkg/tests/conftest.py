import numpy as np
import pytest

from inkline import nn


def finite_difference_check(build_loss, tensors, rng, h=1e-6, samples=8):
    """Max relative error between backprop and central differences.

    ``build_loss`` re-evaluates the scalar loss from the current tensor
    data; tensors must be float64 for test-grade precision.
    """
    loss = build_loss()
    loss.backward()
    grads = [t.grad.copy() for t in tensors]
    worst = 0.0
    for t, g in zip(tensors, grads):
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        idxs = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
        for i in idxs:
            old = flat[i]
            flat[i] = old + h
            fp = build_loss().item()
            flat[i] = old - h
            fm = build_loss().item()
            flat[i] = old
            numeric = (fp - fm) / (2 * h)
            denom = max(1e-8, abs(numeric), abs(gflat[i]))
            worst = max(worst, abs(numeric - gflat[i]) / denom)
    for t in tensors:
        t.grad = None
    return worst


def cast_params(params, dtype):
    for p in params:
        p.tensor.data = p.tensor.data.astype(dtype)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
