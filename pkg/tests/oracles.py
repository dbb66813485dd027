"""Independent reference implementations used by unit and acceptance tests.

These deliberately avoid the package's own algorithms: recursive RDP,
exhaustive DTW path search, nested-loop convolution, recursive edit
distance, and a direct numpy evaluation of the contrastive formula.
"""

import math
from functools import lru_cache

import numpy as np


def point_line_dist(p, a, b):
    if a == b:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    n = abs((b[0] - a[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (b[1] - a[1]))
    return n / math.hypot(b[0] - a[0], b[1] - a[1])


def rdp_reference(points, epsilon):
    """Recursive Ramer-Douglas-Peucker on a list of (x, y) tuples."""
    if len(points) < 3:
        return list(points)
    dmax, idx = 0.0, 0
    for i in range(1, len(points) - 1):
        d = point_line_dist(points[i], points[0], points[-1])
        if d > dmax:
            dmax, idx = d, i
    if dmax > epsilon:
        left = rdp_reference(points[: idx + 1], epsilon)
        right = rdp_reference(points[idx:], epsilon)
        return left[:-1] + right
    return [points[0], points[-1]]


def dtw_bruteforce(a_xy, b_xy):
    """Minimal warping-path cost over all monotone paths (tuple inputs)."""

    @lru_cache(maxsize=None)
    def best(i, j):
        cost = float(np.hypot(a_xy[i][0] - b_xy[j][0], a_xy[i][1] - b_xy[j][1]))
        if i == 0 and j == 0:
            return cost
        options = []
        if i > 0:
            options.append(best(i - 1, j))
        if j > 0:
            options.append(best(i, j - 1))
        if i > 0 and j > 0:
            options.append(best(i - 1, j - 1))
        return cost + min(options)

    return best(len(a_xy) - 1, len(b_xy) - 1)


def levenshtein_bruteforce(ref, hyp):
    """Exhaustive minimal edit distance by recursion."""

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            go(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]),
            go(i - 1, j) + 1,
            go(i, j - 1) + 1,
        )

    return go(len(ref), len(hyp))


def conv1d_reference(x, w, stride=1, dilation=1, padding=0):
    """Brute-force nested-loop cross-correlation, (C, L) single sample."""
    c_out, c_in, k = w.shape
    _, L = x.shape
    xp = np.pad(x, ((0, 0), (padding, padding)))
    L_out = (L + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    y = np.zeros((c_out, L_out))
    for o in range(c_out):
        for t in range(L_out):
            for c in range(c_in):
                for kk in range(k):
                    y[o, t] += xp[c, t * stride + kk * dilation] * w[o, c, kk]
    return y


def contrastive_reference(pairs, weight, tau):
    """Direct evaluation of the per-scale contrastive formula."""
    z = [(e.mean(axis=0) @ weight, ep.mean(axis=0) @ weight) for e, ep in pairs]
    b = len(z)
    total = 0.0
    for k in range(b):
        num = np.exp(z[k][0] @ z[k][1] / tau)
        den = sum(np.exp(z[k][0] @ z[i][1] / tau) for i in range(b) if i != k)
        total += -np.log(num / den)
    return total / b
