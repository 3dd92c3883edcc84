"""Brute-force reference implementations used only by the tests."""
import numpy as np


def brute_indicators(values, k):
    x = np.asarray(values, dtype=float)
    threshold = sorted(x)[x.size - k - 1]
    return np.array([v > threshold for v in x]), threshold


def grid_process(values, k, points):
    """``C_n`` and its left limits on the grid ``j / points`` by direct counting."""
    ind, _ = brute_indicators(values, k)
    n = ind.size
    s = np.arange(points + 1) / points
    cum = np.concatenate(([0], np.cumsum(ind)))
    # i/n <= s  <=>  i <= n j / points; exact integer arithmetic
    j = np.arange(points + 1)
    right = cum[(n * j) // points]
    left = cum[np.maximum(-(-(n * j) // points) - 1, 0)]
    rk = np.sqrt(k)
    return s, rk * (right / k - s), rk * (left / k - s)


def grid_sup(values, k, points=100_000):
    _, right, left = grid_process(values, k, points)
    return float(max(np.abs(right).max(), np.abs(left[1:]).max()))


def grid_l2(values, k, points=100_000):
    """Midpoint rule on ``points`` equal cells."""
    ind, _ = brute_indicators(values, k)
    n = ind.size
    mids = (np.arange(points) + 0.5) / points
    cum = np.concatenate(([0], np.cumsum(ind)))
    vals = np.sqrt(k) * (cum[np.floor(n * mids).astype(int)] / k - mids)
    return float(np.mean(vals**2))
