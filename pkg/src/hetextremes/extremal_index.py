"""Block-maxima method-of-moments estimators of the extremal index.

The series is cut into ``k' = floor(n/q)`` disjoint blocks of size ``q``.  The
pseudo-observation of block j is ``q (1 - F^(max of block j))`` with F^ the
empirical c.d.f.; in the limit it is exponential with rate ``theta c(xi)``.
Two estimators follow:

    theta1 = tau^ / mean_j Z^_j,                tau^ = int_0^1 1/c^(s) ds
    theta2 = 1 / mean_j (Z^_j c^(j / k'))

where c^ is the scedasis estimate truncated from below at kappa.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .empirical_process import TruthModel
from .errors import ConfigError, EstimationError
from .kernels import BoundaryKernel
from .scedasis import ScedasisConfig, ScedasisCurve, as_series, scedasis_estimate

SUGGESTED_BLOCK_SIZES = (8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class EiConfig:
    q: int
    k: int
    h: float = 0.2
    kappa: float = 0.1
    G: int = 1024

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ConfigError(f"block size q must be an integer >= 2, got {self.q!r}")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive for extremal-index estimation")
        if int(self.G) != self.G or self.G < 2:
            raise ConfigError(f"integration grid size G must be >= 2, got {self.G!r}")

    def check(self, n: int) -> int:
        if self.q >= n:
            raise ConfigError(f"block size q={self.q} must be smaller than n={n}")
        kp = n // self.q
        if kp < 2:
            raise ConfigError(f"need at least two blocks, got k'={kp}")
        return kp


def _block_maxima(x: np.ndarray, q: int) -> np.ndarray:
    kp = x.size // q
    return x[: kp * q].reshape(kp, q).max(axis=1)


def block_pseudo_obs(values, q: int) -> np.ndarray:
    """``Z^_j = q (1 - F^_n(block max))`` for the complete blocks; the partial tail block is dropped."""
    x = as_series(values)
    n = x.size
    if int(q) != q or not 2 <= q < n:
        raise ConfigError(f"block size q must satisfy 2 <= q < n={n}, got {q!r}")
    maxima = _block_maxima(x, int(q))
    ecdf = np.searchsorted(np.sort(x), maxima, side="right") / n
    return q * (1.0 - ecdf)


def true_pseudo_obs(values, truth: TruthModel | None, q: int) -> np.ndarray:
    """Pseudo-observations with the reference c.d.f. F in place of the empirical one."""
    if truth is None or truth.cdf is None:
        raise ConfigError("true pseudo-observations need a truth model with a reference c.d.f.")
    x = as_series(values)
    if int(q) != q or not 2 <= q < x.size:
        raise ConfigError(f"block size q must satisfy 2 <= q < n={x.size}, got {q!r}")
    return q * (1.0 - np.asarray(truth.cdf(_block_maxima(x, int(q)))))


def tau_hat(curve: ScedasisCurve, G: int = 1024) -> float:
    """Trapezoid rule for ``int_0^1 1 / c^(s) ds`` on a uniform G-point grid."""
    if curve.kappa <= 0:
        raise ConfigError("tau estimation needs kappa > 0 (integrand unbounded otherwise)")
    if G < 2:
        raise ConfigError("G must be at least 2")
    grid = np.linspace(0.0, 1.0, G)
    if curve.grid.size == G and np.array_equal(curve.grid, grid):
        vals = curve.values
    else:
        vals = curve.at(grid)
    return float(trapezoid(1.0 / vals, grid))


@dataclass
class EiEstimate:
    z_hat: np.ndarray = field(repr=False)
    T_hat: float
    tau_hat: float
    theta1: float
    theta2: float
    theta1_raw: float
    theta2_raw: float
    clamped: bool
    config: dict

    def to_dict(self) -> dict:
        return {
            "theta1": self.theta1, "theta2": self.theta2, "theta1_raw": self.theta1_raw,
            "theta2_raw": self.theta2_raw, "clamped": self.clamped, "T_hat": self.T_hat,
            "tau_hat": self.tau_hat, "n_blocks": int(self.z_hat.size), "config": self.config,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def theta_from_curve(values, curve: ScedasisCurve, q: int, G: int = 1024) -> EiEstimate:
    """Both estimators for a given (already computed) scedasis curve."""
    x = as_series(values)
    if int(q) != q or not 2 <= q < x.size or x.size // q < 2:
        raise ConfigError(f"block size q={q!r} needs 2 <= q and at least two blocks")
    z = block_pseudo_obs(x, q)
    kp = z.size
    T = float(z.mean())
    if T == 0.0:
        raise EstimationError("all block pseudo-observations are zero; extremal index undefined")
    tau = tau_hat(curve, G)
    c_at_blocks = curve.at(np.arange(1, kp + 1) / kp)
    t2 = float(np.mean(z * c_at_blocks))
    theta1_raw = tau / T
    theta2_raw = 1.0 / t2
    theta1, theta2 = min(theta1_raw, 1.0), min(theta2_raw, 1.0)
    return EiEstimate(
        z_hat=z, T_hat=T, tau_hat=tau, theta1=theta1, theta2=theta2, theta1_raw=theta1_raw,
        theta2_raw=theta2_raw, clamped=theta1 != theta1_raw or theta2 != theta2_raw,
        config={"q": int(q), "k": curve.k, "h": curve.h, "kappa": curve.kappa, "G": int(G), "n": x.size},
    )


def theta_estimators(values, cfg: EiConfig, bk: BoundaryKernel | None = None) -> EiEstimate:
    """Extremal-index estimates; values above 1 are clamped to 1 and flagged."""
    x = as_series(values)
    cfg.check(x.size)
    grid = np.linspace(0.0, 1.0, cfg.G)
    curve = scedasis_estimate(x, ScedasisConfig(k=cfg.k, h=cfg.h, kappa=cfg.kappa, grid=grid), bk)
    return theta_from_curve(x, curve, cfg.q, cfg.G)
