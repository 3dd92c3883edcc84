"""Data-generating processes of the simulation study.

Base series are either max-autoregressive (ARMAX) with Frechet(1) margins or
ARCH(1) with Gaussian innovations.  Observable series are scale models
``X_i = sigma(i/n, W_i) W_i`` whose scedasis function is one of the families
in :class:`ScedasisFamily`.
"""
from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .empirical_process import TruthModel
from .errors import ConfigError

ARCH_OMEGA = 2e-5
# scaling exponent kappa' used by the ARCH scale model, lambda = 0.7.  It solves
# E[(lam V^2)^kappa'] = 1, which makes it the tail index of W^2; W itself has
# tail index 2 kappa'.
ARCH_TAIL_INDEX = {0.7: 1.586}
# extremal index of the ARCH(1) series for lambda = 0.7
ARCH_THETA = {0.7: 0.721}
ARCH_TABLE_SEED = 20240607
ARCH_TABLE_SIZE = 10_000_000

FAMILY_KINDS = ("c1", "c2", "c1-threshold", "c2-threshold")


def rng_stream(master_seed: int, *index: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, index...)``.

    Streams come from ``SeedSequence(master_seed, spawn_key=index)`` and do
    not depend on the order in which they are created.
    """
    key = tuple(int(i) for i in index)
    if any(i < 0 for i in key):
        raise ConfigError("stream indices must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=key)))


rng_streams = rng_stream


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / 2.0**53


def frechet(rng: np.random.Generator, size) -> np.ndarray:
    return -1.0 / np.log(open_uniform(rng, size))


@dataclass(frozen=True)
class ScedasisFamily:
    """Scedasis function families.

    ``c1``: straight line from (0, beta) to (1, 2 - beta).
    ``c2``: polygon through (0, beta), (1/2, 2 - beta), (1, beta).
    ``*-threshold``: the same c, but the scaling acts only on base values
    at or above the ``threshold_level`` quantile of the base c.d.f.
    """

    kind: str = "c1"
    beta: float = 1.0
    threshold_level: float = 0.8

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ConfigError(f"unknown scedasis family {self.kind!r}; choose from {FAMILY_KINDS}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta!r}")

    @property
    def is_threshold(self) -> bool:
        return self.kind.endswith("-threshold")

    @property
    def shape(self) -> str:
        return self.kind.split("-")[0]

    def c(self, s):
        s = np.asarray(s, dtype=float)
        b = self.beta
        if self.shape == "c1":
            out = b + 2.0 * (1.0 - b) * s
        else:
            out = np.where(s <= 0.5, b + 4.0 * (1.0 - b) * s, 4.0 - 3.0 * b - 4.0 * (1.0 - b) * s)
        return out if out.ndim else float(out)

    def C(self, s):
        s = np.asarray(s, dtype=float)
        b = self.beta
        if self.shape == "c1":
            out = b * s + (1.0 - b) * s * s
        else:
            left = b * s + 2.0 * (1.0 - b) * s * s
            right = 0.5 + (4.0 - 3.0 * b) * (s - 0.5) - 2.0 * (1.0 - b) * (s * s - 0.25)
            out = np.where(s <= 0.5, left, right)
        return out if out.ndim else float(out)

    @property
    def c_max(self) -> float:
        return 2.0 - self.beta

    def label(self) -> str:
        return f"{self.kind}(beta={self.beta:g})"


def scedasis_value(fam: ScedasisFamily, s, w=None, p: float | None = None):
    """Scale factor of the family at time ``s`` for base value ``w``.

    Threshold kinds need ``w`` and the base-law threshold ``p``; they return
    1 where ``w < p``.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < 0) | (s_arr > 1)):
        raise ConfigError("s must lie in [0, 1]")
    c = fam.c(s)
    if not fam.is_threshold:
        return c
    if w is None or p is None:
        raise ConfigError(f"family {fam.kind!r} needs the base value w and threshold p")
    out = np.where(np.asarray(w) >= p, c, 1.0)
    return out if out.ndim else float(out)


@dataclass
class SimOutput:
    x: np.ndarray
    w: np.ndarray
    u: np.ndarray
    truth: TruthModel
    description: dict

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "X", "W", "U"])
            for i, (x, w, u) in enumerate(zip(self.x, self.w, self.u), start=1):
                writer.writerow([i, repr(float(x)), repr(float(w)), repr(float(u))])


@njit(cache=True, nogil=True)
def _armax_recursion(w0, lam, v):
    out = np.empty(v.size)
    prev = w0
    for t in range(v.size):
        nxt = (1.0 - lam) * v[t]
        if lam * prev > nxt:
            nxt = lam * prev
        out[t] = nxt
        prev = nxt
    return out


@njit(cache=True, nogil=True)
def _arch_recursion(lam, omega, v, burn_in):
    out = np.empty(v.size - burn_in)
    prev = 0.0
    for t in range(v.size):
        prev = np.sqrt(omega + lam * prev * prev) * v[t]
        if t >= burn_in:
            out[t - burn_in] = prev
    return out


def armax_path(n: int, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary ARMAX path of length n started from an exact Frechet(1) draw."""
    if not 0.0 <= lam < 1.0:
        raise ConfigError(f"ARMAX lambda must lie in [0, 1), got {lam!r}")
    w0 = frechet(rng, 1)[0]
    return _armax_recursion(w0, float(lam), frechet(rng, n))


def arch_path(n: int, lam: float, rng: np.random.Generator, burn_in: int = 10_000) -> np.ndarray:
    """ARCH(1) path ``W_t = (omega + lam W_{t-1}^2)^{1/2} V_t`` after burn-in from 0."""
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"ARCH lambda must lie in (0, 1), got {lam!r}")
    if burn_in < 1000:
        raise ConfigError(f"ARCH burn-in must be at least 1000, got {burn_in!r}")
    return _arch_recursion(float(lam), ARCH_OMEGA, rng.standard_normal(n + burn_in), int(burn_in))


def frechet_cdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    return out if out.ndim else float(out)


def frechet_V(t):
    """``F^{-1}(1 - 1/t)`` for the Frechet(1) law, t > 1."""
    t = np.asarray(t, dtype=float)
    out = -1.0 / np.log1p(-1.0 / t)
    return out if out.ndim else float(out)


def _check_n(n: int) -> int:
    if int(n) != n or n < 2:
        raise ConfigError(f"n must be an integer >= 2, got {n!r}")
    return int(n)


def _scale_factors(fam: ScedasisFamily, n: int, w: np.ndarray, p: float | None, kappa_prime: float) -> np.ndarray:
    s = np.arange(1, n + 1) / n
    factor = fam.c(s) ** (1.0 / kappa_prime)
    if fam.is_threshold:
        factor = np.where(w >= p, factor, 1.0)
    return factor


def simulate_armax(n: int, lam: float, fam: ScedasisFamily, seed=None) -> SimOutput:
    """ARMAX scale model ``X_i = c(i/n) W_i`` (threshold kinds: scaled only if ``W_i >= p``)."""
    n = _check_n(n)
    rng = _as_rng(seed)
    w = armax_path(n, lam, rng)
    return armax_output(w, lam, fam)


def armax_output(w: np.ndarray, lam: float, fam: ScedasisFamily) -> SimOutput:
    """Observable series and truth for a given ARMAX base path."""
    n = w.size
    p = frechet_V(1.0 / (1.0 - fam.threshold_level)) if fam.is_threshold else None
    x = _scale_factors(fam, n, w, p, 1.0) * w
    truth = TruthModel(
        cdf=frechet_cdf, quantile=frechet_V, scedasis=fam.c, integrated=fam.C,
        c_max=fam.c_max, theta=1.0 - lam,
    )
    desc = {"model": "armax", "lambda": lam, "family": fam.kind, "beta": fam.beta, "n": n, "threshold_p": p}
    return SimOutput(x=x, w=w, u=frechet_cdf(w), truth=truth, description=desc)


class ArchMarginal:
    """Empirical stationary c.d.f. of the ARCH(1) base series.

    Built from a quantile table; outside the tabulated range the tails are
    extended by a Pareto law with index ``tail_index`` so that cdf values
    stay strictly inside (0, 1).
    """

    def __init__(self, levels, values, n_sim: int, seed: int, tail_index: float):
        self.levels = np.asarray(levels, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.n_sim = int(n_sim)
        self.seed = int(seed)
        self.tail_index = float(tail_index)

    def cdf(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lv, qv, a = self.levels, self.values, self.tail_index
        out = np.interp(x, qv, lv)
        hi = x > qv[-1]
        lo = x < qv[0]
        out[hi] = 1.0 - (1.0 - lv[-1]) * (x[hi] / qv[-1]) ** -a
        out[lo] = lv[0] * (x[lo] / qv[0]) ** -a
        return float(out[0]) if scalar else out

    def quantile(self, level):
        level = np.asarray(level, dtype=float)
        lv, qv, a = self.levels, self.values, self.tail_index
        out = np.interp(level, lv, qv)
        with np.errstate(divide="ignore"):
            hi = qv[-1] * ((1.0 - level) / (1.0 - lv[-1])) ** (-1.0 / a)
            lo = qv[0] * (level / lv[0]) ** (-1.0 / a)
        out = np.where(level > lv[-1], hi, np.where(level < lv[0], lo, out))
        return out if out.ndim else float(out)

    def V(self, t):
        return self.quantile(1.0 - 1.0 / np.asarray(t, dtype=float))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "value", "n_sim", "seed"])
            for lv, qv in zip(self.levels, self.values):
                writer.writerow([repr(float(lv)), repr(float(qv)), self.n_sim, self.seed])

    @classmethod
    def from_csv(cls, path, tail_index: float) -> "ArchMarginal":
        data = np.genfromtxt(path, delimiter=",", names=True)
        return cls(data["level"], data["value"], int(data["n_sim"][0]), int(data["seed"][0]), tail_index)


def _local_tail_index(levels, values) -> float:
    i, j = np.searchsorted(levels, [0.999, levels[-1]])
    return float(np.log((1 - levels[i]) / (1 - levels[j])) / np.log(values[j] / values[i]))


def build_arch_marginal(lam: float, n_sim: int = ARCH_TABLE_SIZE, seed: int = ARCH_TABLE_SEED,
                        burn_in: int = 10_000, table_size: int = 9999) -> ArchMarginal:
    """Simulate one long burned-in ARCH path and tabulate its quantiles."""
    w = arch_path(n_sim, lam, rng_stream(seed, 0), burn_in)
    levels = np.arange(1, table_size + 1) / (table_size + 1)
    values = np.quantile(w, levels)
    return ArchMarginal(levels, values, n_sim, seed, arch_marginal_tail_index(lam, levels, values))


def arch_marginal_tail_index(lam: float, levels=None, values=None) -> float:
    """Tail index of the ARCH(1) marginal itself (twice the W^2 index)."""
    if lam in ARCH_TAIL_INDEX:
        return 2.0 * ARCH_TAIL_INDEX[lam]
    return _local_tail_index(levels, values)


def _shipped_table_path(lam: float) -> Path:
    return Path(str(resources.files("hetextremes") / "data" / f"arch_quantiles_lam{lam:g}.csv"))


@functools.lru_cache(maxsize=8)
def arch_marginal(lam: float) -> ArchMarginal:
    """Shipped table when available (lambda = 0.7), else a 10^6-draw simulation."""
    path = _shipped_table_path(lam)
    if path.exists():
        data = np.genfromtxt(path, delimiter=",", names=True)
        return ArchMarginal.from_csv(path, arch_marginal_tail_index(lam, data["level"], data["value"]))
    return build_arch_marginal(lam, n_sim=1_000_000)


def simulate_arch(n: int, lam: float, fam: ScedasisFamily, burn_in: int = 10_000, seed=None,
                  kappa_prime: float | None = None) -> SimOutput:
    """ARCH scale model ``X_i = c(i/n)^{1/kappa'} W_i``.

    ``kappa_prime`` defaults to the tabulated tail index, which exists only
    for lambda = 0.7.
    """
    n = _check_n(n)
    rng = _as_rng(seed)
    kappa_prime = resolve_kappa_prime(lam, kappa_prime)
    w = arch_path(n, lam, rng, burn_in)
    return arch_output(w, lam, fam, kappa_prime)


def resolve_kappa_prime(lam: float, kappa_prime: float | None) -> float:
    if kappa_prime is not None:
        if kappa_prime <= 0:
            raise ConfigError("kappa_prime must be positive")
        return float(kappa_prime)
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"ARCH lambda must lie in (0, 1), got {lam!r}")
    if lam not in ARCH_TAIL_INDEX:
        raise ConfigError(f"no tabulated tail index for lambda={lam}; pass kappa_prime explicitly")
    return ARCH_TAIL_INDEX[lam]


def arch_output(w: np.ndarray, lam: float, fam: ScedasisFamily, kappa_prime: float) -> SimOutput:
    n = w.size
    marginal = arch_marginal(lam)
    p = float(marginal.quantile(fam.threshold_level)) if fam.is_threshold else None
    x = _scale_factors(fam, n, w, p, kappa_prime) * w
    c_eff, C_eff, c_max = effective_scedasis(fam, marginal.tail_index / kappa_prime)
    truth = TruthModel(
        cdf=marginal.cdf, quantile=marginal.V, scedasis=c_eff, integrated=C_eff,
        c_max=c_max, theta=ARCH_THETA.get(lam),
    )
    desc = {"model": "arch", "lambda": lam, "family": fam.kind, "beta": fam.beta, "n": n,
            "kappa_prime": kappa_prime, "threshold_p": p}
    return SimOutput(x=x, w=w, u=marginal.cdf(w), truth=truth, description=desc)


def effective_scedasis(fam: ScedasisFamily, power: float, grid_size: int = 20001):
    """Scedasis of ``X = c^{1/kappa'} W`` when W has tail index ``power * kappa'``.

    ``P(X_i > x) / P(W > x) -> c(i/n)^power``, so after normalization the
    scedasis function is ``c^power / int c^power``.  Returns ``(c, C, c_max)``.
    """
    if abs(power - 1.0) < 1e-12:
        return fam.c, fam.C, fam.c_max
    grid = np.linspace(0.0, 1.0, grid_size)
    dens = fam.c(grid) ** power
    cum = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))))
    total = cum[-1]

    def c(s):
        out = np.asarray(fam.c(s)) ** power / total
        return out if out.ndim else float(out)

    def C(s):
        out = np.interp(np.asarray(s, dtype=float), grid, cum / total)
        return out if out.ndim else float(out)

    return c, C, float(dens.max() / total)


def hill_estimator(values, k: int) -> float:
    """Hill estimate of the tail index (not its reciprocal) from the top k order statistics."""
    x = np.sort(np.asarray(values, dtype=float))
    if not 1 <= k < x.size:
        raise ConfigError("need 1 <= k < n")
    top = x[-k:]
    ref = x[-k - 1]
    if ref <= 0:
        raise ConfigError("Hill estimator needs a positive (k+1)-th largest value")
    return float(1.0 / np.mean(np.log(top / ref)))
