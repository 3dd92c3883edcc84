"""Sequential tail empirical processes for simulated data.

Both processes need quantities that are only known in simulations (the
uniformized series and the reference quantile function), which is why they
take a :class:`TruthModel`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DataError
from .scedasis import _check_k, as_series


@dataclass(frozen=True)
class TruthModel:
    """Simulation truth for a scale model ``X_i = sigma(i/n, W_i) W_i``.

    cdf:       reference c.d.f. F of the stationary base series
    quantile:  ``V(t) = F^{-1}(1 - 1/t)`` for t > 1, or None if unavailable
    scedasis:  c(s), vectorized
    integrated: C(s) = int_0^s c
    c_max:     sup of c over [0, 1]
    theta:     extremal index of the base series, if known
    """

    cdf: Callable
    quantile: Optional[Callable]
    scedasis: Callable
    integrated: Callable
    c_max: float
    theta: Optional[float] = None


def default_grid(size: int = 64) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


def _counts_before(hits: np.ndarray, n: int, grid_s: np.ndarray) -> np.ndarray:
    # hits: (n, X) boolean; returns (S, X) counts over i <= floor(n s)
    cum = np.vstack([np.zeros((1, hits.shape[1])), np.cumsum(hits, axis=0)])
    idx = np.floor(n * grid_s + 1e-9).astype(np.int64)
    return cum[idx]


def simple_step(u_series, truth: TruthModel, k: int, grid_s=None, grid_x=None) -> np.ndarray:
    """Simple STEP on a grid; rows follow ``grid_s``, columns ``grid_x``.

    ``S_n(s, x) = sqrt(k) { k^{-1} sum_{i <= [ns]} 1(U_i > 1 - (k/n) c(i/n) x) - x C(s) }``
    """
    u = np.asarray(u_series, dtype=float)
    if u.ndim != 1 or np.any((u <= 0.0) | (u >= 1.0)):
        raise DataError("uniformized series must lie in the open interval (0, 1)")
    n = u.size
    k = _check_k(k, n)
    grid_s = default_grid() if grid_s is None else np.asarray(grid_s, dtype=float)
    grid_x = default_grid() if grid_x is None else np.asarray(grid_x, dtype=float)
    if np.any(grid_x < 0):
        raise ConfigError("x grid must be non-negative")
    if (k / n) * truth.c_max * grid_x.max() > 1.0:
        raise ConfigError("(k/n) * c_max * x exceeds 1 on the x grid")
    c_i = truth.scedasis(np.arange(1, n + 1) / n)
    hits = u[:, None] > 1.0 - (k / n) * c_i[:, None] * grid_x[None, :]
    counts = _counts_before(hits, n, grid_s)
    return np.sqrt(k) * (counts / k - grid_x[None, :] * truth.integrated(grid_s)[:, None])


def step(values, truth: TruthModel, k: int, grid_s=None, grid_x=None) -> np.ndarray:
    """STEP ``F_n(s, x)`` with threshold ``V(n / (k x))``; the x = 0 column is 0."""
    if truth.quantile is None:
        raise ConfigError("truth model has no quantile function V")
    x = as_series(values)
    n = x.size
    k = _check_k(k, n)
    grid_s = default_grid() if grid_s is None else np.asarray(grid_s, dtype=float)
    grid_x = default_grid() if grid_x is None else np.asarray(grid_x, dtype=float)
    if np.any(grid_x < 0):
        raise ConfigError("x grid must be non-negative")
    thresholds = np.full(grid_x.size, np.inf)
    pos = grid_x > 0
    thresholds[pos] = truth.quantile(n / (k * grid_x[pos]))
    hits = x[:, None] > thresholds[None, :]
    counts = _counts_before(hits, n, grid_s)
    return np.sqrt(k) * (counts / k - grid_x[None, :] * truth.integrated(grid_s)[:, None])


def write_matrix_csv(path, matrix: np.ndarray, grid_s, grid_x) -> None:
    """Rows are s-grid points, columns x-grid points; first column holds s."""
    header = "s," + ",".join(repr(float(v)) for v in grid_x)
    rows = np.column_stack([np.asarray(grid_s, dtype=float), matrix])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
