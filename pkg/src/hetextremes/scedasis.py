"""Estimation of the scedasis function and its integral.

Everything here depends on the data only through the exceedance indicators
``1(X_i > X_{n,n-k})``, so all outputs are invariant under strictly
increasing transformations of the series.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .kernels import BoundaryKernel

DEFAULT_KAPPA = 0.1
# guards floor(n * s) against s = i/n being represented as i/n - ulp
_FLOOR_EPS = 1e-9


def as_series(values) -> np.ndarray:
    """Validate a series: 1-d, length >= 2, all finite.  Returns a float copy."""
    x = np.array(values, dtype=float)
    if x.ndim != 1:
        raise DataError(f"series must be one-dimensional, got shape {x.shape}")
    if x.size < 2:
        raise DataError("series must contain at least two observations")
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise DataError(f"series contains non-finite values at positions {bad[:10].tolist()}")
    return x


def _check_k(k: int, n: int) -> int:
    if int(k) != k or not 1 <= k < n:
        raise ConfigError(f"k must be an integer with 1 <= k < n={n}, got {k!r}")
    return int(k)


def default_grid(size: int = 512) -> np.ndarray:
    """``size`` equispaced interior points together with 0 and 1."""
    return np.linspace(0.0, 1.0, size + 2)


def exceedance_indicators(values, k: int) -> tuple[np.ndarray, float]:
    """Indicators ``X_i > X_{n,n-k}`` and the threshold ``X_{n,n-k}``.

    The threshold is the (n-k)-th smallest value.  The inequality is strict,
    so with ties at the threshold fewer than ``k`` indicators are set.
    """
    x = as_series(values)
    n = x.size
    k = _check_k(k, n)
    threshold = float(np.partition(x, n - k - 1)[n - k - 1])
    return x > threshold, threshold


@dataclass(frozen=True)
class ScedasisConfig:
    k: int
    h: float = 0.2
    kappa: float = DEFAULT_KAPPA
    grid: np.ndarray = field(default_factory=default_grid, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ConfigError("evaluation grid must be a non-empty 1-d array")
        if np.any(np.diff(grid) < 0) or grid[0] < 0.0 or grid[-1] > 1.0:
            raise ConfigError("evaluation grid must be sorted within [0, 1]")
        if not 0.0 < self.h < 0.5:
            raise ConfigError(f"bandwidth h must lie in (0, 1/2), got {self.h!r}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be non-negative, got {self.kappa!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "grid", grid)

    def to_dict(self) -> dict:
        return {"k": int(self.k), "h": self.h, "kappa": self.kappa, "grid_size": int(self.grid.size)}


def _kernel_sum(positions: np.ndarray, s: np.ndarray, bk: BoundaryKernel, chunk: int = 2048) -> np.ndarray:
    # sum_i K_b((s - t_i)/h, s) over exceedance times t_i, chunked over s
    out = np.zeros(s.size)
    if positions.size == 0:
        return out
    h = bk.h
    for start in range(0, s.size, chunk):
        ss = s[start:start + chunk]
        alpha, beta = bk.coefficients(ss)
        x = (ss[:, None] - positions[None, :]) / h
        near = np.abs(x) <= 1.0
        kx = np.where(near, bk.base(np.where(near, x, 0.0)), 0.0)
        out[start:start + chunk] = ((alpha[:, None] - beta[:, None] * x) * kx).sum(axis=1)
    return out


@dataclass(frozen=True)
class ScedasisCurve:
    """Kernel estimate of the scedasis function on a grid.

    ``raw`` is the kernel estimate, ``values`` its truncation at ``kappa``
    from below.  :meth:`at` re-evaluates the estimator at arbitrary points.
    """

    grid: np.ndarray
    raw: np.ndarray
    values: np.ndarray
    k: int
    h: float
    kappa: float
    n: int
    n_exceed: int
    exceed_times: np.ndarray = field(repr=False)
    kernel: BoundaryKernel = field(repr=False)

    def at(self, s, truncated: bool = True) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        raw = _kernel_sum(self.exceed_times, s, self.kernel) / (self.k * self.h)
        return np.maximum(raw, self.kappa) if truncated else raw

    @property
    def exceedance_count_mismatch(self) -> bool:
        return self.n_exceed != self.k

    def to_dict(self) -> dict:
        return {
            "k": self.k, "h": self.h, "kappa": self.kappa, "n": self.n,
            "n_exceed": self.n_exceed, "exceedance_count_mismatch": self.exceedance_count_mismatch,
            "kernel": self.kernel.base.name,
        }


def scedasis_estimate(values, cfg: ScedasisConfig, bk: BoundaryKernel | None = None) -> ScedasisCurve:
    """Boundary-corrected kernel estimate of the scedasis function.

    ``c~(s) = (k h)^{-1} sum_i 1(X_i > X_{n,n-k}) K_b((s - i/n)/h, s)`` and
    the truncated version ``max(c~, kappa)`` on ``cfg.grid``.
    """
    x = as_series(values)
    n = x.size
    _check_k(cfg.k, n)
    if bk is None:
        bk = BoundaryKernel(h=cfg.h)
    elif abs(bk.h - cfg.h) > 0:
        raise ConfigError(f"kernel bandwidth {bk.h} differs from configured h={cfg.h}")
    ind, _ = exceedance_indicators(x, cfg.k)
    times = (np.flatnonzero(ind) + 1) / n
    raw = _kernel_sum(times, cfg.grid, bk) / (cfg.k * cfg.h)
    return ScedasisCurve(
        grid=cfg.grid, raw=raw, values=np.maximum(raw, cfg.kappa), k=int(cfg.k), h=cfg.h,
        kappa=cfg.kappa, n=n, n_exceed=int(ind.sum()), exceed_times=times, kernel=bk,
    )


def _floor_ns(n: int, s) -> np.ndarray:
    return np.floor(n * np.asarray(s, dtype=float) + _FLOOR_EPS).astype(np.int64)


@dataclass(frozen=True)
class SequentialProcess:
    """Integrated scedasis estimate ``C^_n`` and the centred process ``C_n``.

    ``positions`` holds the 1-based indices of the exceedances in increasing
    order.  ``C^_n(s) = #{positions <= floor(n s)} / k`` is a right-continuous
    step function and ``C_n(s) = sqrt(k) (C^_n(s) - s)``.
    """

    n: int
    k: int
    positions: np.ndarray
    threshold: float

    @property
    def n_exceed(self) -> int:
        return int(self.positions.size)

    def C_hat(self, s):
        cnt = np.searchsorted(self.positions, _floor_ns(self.n, s), side="right")
        out = cnt / self.k
        return out if np.ndim(out) else float(out)

    def Cn(self, s):
        s = np.asarray(s, dtype=float)
        out = np.sqrt(self.k) * (np.asarray(self.C_hat(s)) - s)
        return out if np.ndim(out) else float(out)

    def pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Piece start points, end points and ``C^_n`` values.

        Piece j covers ``[start_j, end_j)``; the last piece also contains
        s = 1 and may degenerate to the single point {1}.
        """
        t = self.positions / self.n
        starts = np.concatenate(([0.0], t))
        ends = np.concatenate((t, [1.0]))
        vals = np.arange(self.positions.size + 1) / self.k
        return starts, ends, vals


def integrated_scedasis(values, k: int) -> SequentialProcess:
    ind, threshold = exceedance_indicators(values, k)
    positions = np.flatnonzero(ind) + 1
    return SequentialProcess(n=ind.size, k=int(k), positions=positions, threshold=threshold)


def cn_process_sup(proc: SequentialProcess) -> float:
    """Exact ``sup_s |C_n(s)|``.

    Between jumps ``C_n`` is affine with slope ``-sqrt(k)``, so the extremes
    sit at piece starts (attained) or piece ends (left limits).
    """
    starts, ends, vals = proc.pieces()
    rk = np.sqrt(proc.k)
    return float(rk * max(np.abs(vals - starts).max(), np.abs(vals - ends).max()))


def cn_process_l2(proc: SequentialProcess) -> float:
    """Exact ``int_0^1 C_n(s)^2 ds`` by integrating each quadratic piece."""
    starts, ends, vals = proc.pieces()
    return float(proc.k * np.sum((vals - starts) ** 3 - (vals - ends) ** 3) / 3.0)
