"""Tests of the null hypothesis of homoscedastic extremes, ``C(s) = s``.

Three families of tests share the exact step-function machinery of
:mod:`hetextremes.scedasis`:

* multiplier block bootstrap tests (Kolmogorov-Smirnov and Cramer-von Mises
  type), calibrated by ``B`` bootstrap replicates;
* self-normalized tests, which divide by a statistic of the difference of two
  bootstrap processes and compare with fixed Brownian-bridge quantiles;
* the Cramer-von Mises test for independent data, compared with the 0.95
  quantile of ``int_0^1 B(s)^2 ds``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, UninformativeTestError, UnreliableQuantileError
from .scedasis import SequentialProcess, _FLOOR_EPS, cn_process_l2, cn_process_sup, integrated_scedasis
from .simulate import rng_stream

STATISTICS = ("KS", "CvM")
METHOD_NAMES = {
    ("boot", "KS"): "KS-boot",
    ("boot", "CvM"): "CvM-boot",
    ("selfnorm", "KS"): "KS-selfnorm",
    ("selfnorm", "CvM"): "CvM-selfnorm",
}

# bounds |xi| <= M for each multiplier law
MULTIPLIER_BOUNDS = {
    "rademacher": 1.0,
    "mammen": (1.0 + math.sqrt(5.0)) / 2.0,
    "uniform": math.sqrt(3.0),
}

SELFNORM_SEED = 20230101
SELFNORM_PATHS = 200_000
SELFNORM_GRID = 2000
DEFAULT_ALPHAS = (0.01, 0.025, 0.05, 0.1, 0.2)
# 0.95 quantile of int_0^1 B(s)^2 ds, from cvm_reference_quantile(0.05) with
# the defaults above; the classical asymptotic value is 0.46136
CVM_Q95 = 0.462384338103248


def draw_multipliers(rng: np.random.Generator, size, law: str = "rademacher") -> np.ndarray:
    """Bounded i.i.d. multipliers with mean 0 and variance 1."""
    if law == "rademacher":
        return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0
    if law == "mammen":
        s5 = math.sqrt(5.0)
        lo, hi = (1.0 - s5) / 2.0, (1.0 + s5) / 2.0
        return np.where(rng.random(size) < (s5 + 1.0) / (2.0 * s5), lo, hi)
    if law == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=size)
    raise ConfigError(f"unknown multiplier law {law!r}; choose from {sorted(MULTIPLIER_BOUNDS)}")


@dataclass(frozen=True)
class BootstrapConfig:
    r: int
    B: int = 200
    law: str = "rademacher"
    alpha: float = 0.05
    seed: Optional[int] = None

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ConfigError(f"block length r must be a positive integer, got {self.r!r}")
        if int(self.B) != self.B or self.B < 1:
            raise ConfigError(f"B must be a positive integer, got {self.B!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.law not in MULTIPLIER_BOUNDS:
            raise ConfigError(f"unknown multiplier law {self.law!r}")

    def check(self, n: int) -> int:
        """Validate against the sample size and return the block count m."""
        if self.r >= n:
            raise ConfigError(f"block length r={self.r} must be smaller than n={n}")
        m = n // self.r
        if m < 2:
            raise ConfigError(f"need at least two blocks, got m={m}")
        return m


@dataclass(frozen=True)
class StepProcess:
    """Right-continuous step function(s) on [0, 1] jumping only at ``positions / n``.

    ``values[..., j]`` is the value on piece j; piece 0 starts at 0, piece
    j >= 1 at ``positions[j-1] / n``.
    """

    n: int
    positions: np.ndarray
    values: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        t = self.positions / self.n
        return np.diff(np.concatenate(([0.0], t, [1.0])))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.positions, np.floor(self.n * s + _FLOOR_EPS).astype(np.int64), side="right")
        return self.values[..., idx]

    def sup(self) -> np.ndarray:
        # every piece value is attained (the last piece contains s = 1)
        return np.abs(self.values).max(axis=-1)

    def l2(self) -> np.ndarray:
        return (self.values**2 * self.lengths).sum(axis=-1)


def bootstrap_process(proc: SequentialProcess, xi, r: int) -> StepProcess:
    """Multiplier block bootstrap process ``C_{n,xi}`` for one or many multiplier draws.

    ``xi`` has shape ``(m,)`` or ``(B, m)`` with ``m = floor(n / r)``.
    Observations beyond index ``m r`` do not enter.
    """
    n = proc.n
    if r >= n or r < 1:
        raise ConfigError(f"block length r={r} must satisfy 1 <= r < n={n}")
    m = n // r
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != m:
        raise ConfigError(f"expected {m} multipliers per draw, got {xi.shape[-1]}")
    centered = xi - xi.mean(axis=-1, keepdims=True)
    blocks = (proc.positions - 1) // r
    inside = blocks < m
    weights = np.where(inside, centered[..., np.minimum(blocks, m - 1)], 0.0)
    zeros = np.zeros(weights.shape[:-1] + (1,))
    D = np.concatenate((zeros, np.cumsum(weights, axis=-1)), axis=-1) / math.sqrt(proc.k)
    C_hat = np.arange(proc.positions.size + 1) / proc.k
    values = D - C_hat * D[..., -1:]
    return StepProcess(n=n, positions=proc.positions, values=values)


def empirical_quantile(replicates, level: float) -> float:
    """Order statistic number ``ceil(level * B)`` (1-based) of the replicates."""
    reps = np.sort(np.asarray(replicates, dtype=float))
    idx = math.ceil(round(level * reps.size, 9))
    return float(reps[min(max(idx, 1), reps.size) - 1])


def bootstrap_pvalue(observed: float, replicates) -> float:
    reps = np.asarray(replicates, dtype=float)
    return float((1 + np.count_nonzero(reps >= observed)) / (reps.size + 1))


def _summary(reps: np.ndarray) -> dict:
    qs = np.quantile(reps, [0.5, 0.9, 0.95, 0.99])
    return {
        "count": int(reps.size), "mean": float(reps.mean()), "std": float(reps.std(ddof=1)) if reps.size > 1 else 0.0,
        "min": float(reps.min()), "median": float(qs[0]), "q90": float(qs[1]), "q95": float(qs[2]),
        "q99": float(qs[3]), "max": float(reps.max()),
    }


@dataclass
class TestReport:
    """Outcome of one test.  ``reject`` is ``statistic > quantile``."""

    __test__ = False  # not a pytest class

    method: str
    statistic: float
    quantile: float
    reject: bool
    alpha: float
    p_value: Optional[float] = None
    replicates: Optional[np.ndarray] = field(default=None, repr=False)
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "method": self.method, "statistic": self.statistic, "quantile": self.quantile,
            "reject": bool(self.reject), "alpha": self.alpha, "p_value": self.p_value,
            "replicates": None if self.replicates is None else _summary(np.asarray(self.replicates)),
            "config": self.config, "notes": list(self.notes),
        }
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _notes(proc: SequentialProcess) -> list:
    if proc.n_exceed != proc.k:
        return [f"exceedance count {proc.n_exceed} differs from k={proc.k} (ties at the threshold)"]
    return []


def _check_statistic(statistic: str) -> str:
    if statistic not in STATISTICS:
        raise ConfigError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    return statistic


def bootstrap_replicates(proc: SequentialProcess, cfg: BootstrapConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """KS and CvM replicate statistics from ``cfg.B`` multiplier draws."""
    m = cfg.check(proc.n)
    xi = draw_multipliers(rng, (cfg.B, m), cfg.law)
    boot = bootstrap_process(proc, xi, cfg.r)
    return boot.sup(), boot.l2()


def bootstrap_decisions(proc: SequentialProcess, cfg: BootstrapConfig, rng: np.random.Generator) -> dict:
    """Both bootstrap tests from a single set of multiplier draws; used by the harness."""
    sup_reps, l2_reps = bootstrap_replicates(proc, cfg, rng)
    out = {}
    for stat, observed, reps in (("KS", cn_process_sup(proc), sup_reps), ("CvM", cn_process_l2(proc), l2_reps)):
        q = empirical_quantile(reps, 1.0 - cfg.alpha)
        out[stat] = (observed, q, observed > q, bootstrap_pvalue(observed, reps), reps)
    return out


def bootstrap_test(values, k: int, cfg: BootstrapConfig, statistic: str = "CvM", rng=None) -> TestReport:
    """Multiplier block bootstrap test of ``c == 1``.

    Rejects when the observed statistic exceeds the empirical
    ``(1 - alpha)``-quantile of the replicates; p-value
    ``(1 + #{replicates >= observed}) / (B + 1)``.
    """
    _check_statistic(statistic)
    if cfg.B < 20:
        raise UnreliableQuantileError(f"B={cfg.B} is too small for an empirical quantile (need B >= 20)")
    proc = integrated_scedasis(values, k)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    observed, q, reject, pval, reps = bootstrap_decisions(proc, cfg, rng)[statistic]
    return TestReport(
        method=METHOD_NAMES[("boot", statistic)], statistic=float(observed), quantile=q, reject=bool(reject),
        alpha=cfg.alpha, p_value=pval, replicates=reps,
        config={"k": int(k), "n": proc.n, **asdict(cfg)}, notes=_notes(proc),
    )


@dataclass(frozen=True)
class SelfNormQuantiles:
    """Upper quantiles ``q_S(1 - alpha)`` and ``q_T(1 - alpha)`` of the self-normalized limits."""

    alphas: tuple
    q_S: tuple
    q_T: tuple
    paths: int
    grid: int
    seed: int

    def get(self, alpha: float, statistic: str) -> float:
        _check_statistic(statistic)
        for a, qs, qt in zip(self.alphas, self.q_S, self.q_T):
            if abs(a - alpha) < 1e-12:
                return qs if statistic == "KS" else qt
        raise ConfigError(f"no reference quantile tabulated for alpha={alpha}; available: {list(self.alphas)}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "q_S", "q_T", "paths", "grid", "seed"])
            for a, qs, qt in zip(self.alphas, self.q_S, self.q_T):
                writer.writerow([repr(float(a)), repr(float(qs)), repr(float(qt)), self.paths, self.grid, self.seed])

    @classmethod
    def from_csv(cls, path) -> "SelfNormQuantiles":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigError(f"empty quantile table {path}")
        return cls(
            alphas=tuple(float(r["alpha"]) for r in rows), q_S=tuple(float(r["q_S"]) for r in rows),
            q_T=tuple(float(r["q_T"]) for r in rows), paths=int(rows[0]["paths"]),
            grid=int(rows[0]["grid"]), seed=int(rows[0]["seed"]),
        )


def default_selfnorm_quantiles() -> SelfNormQuantiles:
    """Shipped table (regenerate with ``hetextremes quantiles selfnorm``)."""
    path = resources.files("hetextremes") / "data" / "selfnorm_quantiles.csv"
    return SelfNormQuantiles.from_csv(Path(str(path)))


def _bridges(rng: np.random.Generator, count: int, copies: int, grid_size: int) -> np.ndarray:
    # (count, copies, grid_size) Brownian bridges on a uniform grid of [0, 1]
    steps = grid_size - 1
    incr = rng.standard_normal((count, copies, steps)) * math.sqrt(1.0 / steps)
    w = np.concatenate((np.zeros((count, copies, 1)), np.cumsum(incr, axis=-1)), axis=-1)
    s = np.linspace(0.0, 1.0, grid_size)
    return w - s * w[..., -1:]


def _trapezoid_sq(b: np.ndarray) -> np.ndarray:
    sq = b * b
    dx = 1.0 / (b.shape[-1] - 1)
    return dx * (sq.sum(axis=-1) - 0.5 * (sq[..., 0] + sq[..., -1]))


def _simulate_chunks(fn, paths: int, seed: int, chunk: int, threads: int):
    sizes = [min(chunk, paths - start) for start in range(0, paths, chunk)]
    jobs = [(i, size) for i, size in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(rng_stream(seed, job[0]), job[1]), jobs))
    else:
        parts = [fn(rng_stream(seed, i), size) for i, size in jobs]
    return parts


def simulate_selfnorm_limits(paths: int, grid_size: int, seed: int, threads: int = 1, chunk: int = 1000):
    """Draws of ``S_2`` and ``T_2`` from independent bridge triples."""
    if grid_size < 2:
        raise ConfigError(f"grid_size must be at least 2, got {grid_size}")

    def one(rng, count):
        b = _bridges(rng, count, 3, grid_size)
        diff = b[:, 1] - b[:, 2]
        s2 = np.abs(b[:, 0]).max(axis=-1) / np.abs(diff).max(axis=-1)
        t2 = _trapezoid_sq(b[:, 0]) / _trapezoid_sq(diff)
        return s2, t2

    parts = _simulate_chunks(one, paths, seed, chunk, threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _cache_dir() -> Path:
    return Path(os.environ.get("HETEXTREMES_CACHE", Path.home() / ".cache" / "hetextremes"))


def selfnorm_reference_quantiles(alpha_list=DEFAULT_ALPHAS, paths: int = SELFNORM_PATHS, grid_size: int = SELFNORM_GRID,
                                 seed: int = SELFNORM_SEED, threads: int = 1, cache: bool = True) -> SelfNormQuantiles:
    """Monte Carlo quantiles of the self-normalized limit laws.

    Results are cached on disk as CSV keyed by ``(paths, grid_size, seed)``.
    """
    if grid_size < 2:
        raise ConfigError(f"grid_size must be at least 2, got {grid_size}")
    if paths < 10_000 or grid_size < 500:
        warnings.warn("reference quantiles with fewer than 10^4 paths or 500 grid points are coarse", stacklevel=2)
    alphas = tuple(sorted({float(a) for a in alpha_list}))
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise ConfigError("alphas must lie in (0, 1)")
    path = _cache_dir() / f"selfnorm_{paths}_{grid_size}_{seed}.csv"
    if cache and path.exists():
        cached = SelfNormQuantiles.from_csv(path)
        if all(any(abs(a - c) < 1e-12 for c in cached.alphas) for a in alphas):
            idx = [min(range(len(cached.alphas)), key=lambda i: abs(cached.alphas[i] - a)) for a in alphas]
            return SelfNormQuantiles(alphas, tuple(cached.q_S[i] for i in idx), tuple(cached.q_T[i] for i in idx),
                                     paths, grid_size, seed)
    s2, t2 = simulate_selfnorm_limits(paths, grid_size, seed, threads=threads)
    levels = [1.0 - a for a in alphas]
    result = SelfNormQuantiles(alphas, tuple(float(v) for v in np.quantile(s2, levels)),
                               tuple(float(v) for v in np.quantile(t2, levels)), paths, grid_size, seed)
    if cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            result.to_csv(path)
        except OSError:
            pass
    return result


def cvm_reference_quantile(alpha: float = 0.05, paths: int = SELFNORM_PATHS, grid_size: int = SELFNORM_GRID,
                           seed: int = SELFNORM_SEED, threads: int = 1) -> float:
    """Monte Carlo ``(1 - alpha)``-quantile of ``int_0^1 B(s)^2 ds``."""

    def one(rng, count):
        return _trapezoid_sq(_bridges(rng, count, 1, grid_size)[:, 0])

    draws = np.concatenate(_simulate_chunks(one, paths, seed, 2000, threads))
    return float(np.quantile(draws, 1.0 - alpha))


def selfnorm_statistics(proc: SequentialProcess, xi1, xi2, r: int) -> tuple[float, float, float, float]:
    """Numerators and denominators ``(sup C_n, sup diff, int C_n^2, int diff^2)``."""
    diff = bootstrap_process(proc, np.asarray(xi1) - np.asarray(xi2), r)
    return cn_process_sup(proc), float(diff.sup()), cn_process_l2(proc), float(diff.l2())


def selfnorm_decisions(proc: SequentialProcess, r: int, quantiles: SelfNormQuantiles, alpha: float,
                       rng: np.random.Generator, law: str = "rademacher") -> dict:
    if r >= proc.n:
        raise ConfigError(f"block length r={r} must be smaller than n={proc.n}")
    m = proc.n // r
    xi = draw_multipliers(rng, (2, m), law)
    num_s, den_s, num_t, den_t = selfnorm_statistics(proc, xi[0], xi[1], r)
    out = {}
    for stat, num, den in (("KS", num_s, den_s), ("CvM", num_t, den_t)):
        if den == 0.0:
            out[stat] = None
            continue
        value = num / den
        q = quantiles.get(alpha, stat)
        out[stat] = (value, q, value > q)
    return out


def selfnorm_test(values, k: int, r: int, statistic: str = "CvM", quantiles: SelfNormQuantiles | None = None,
                  seed=None, alpha: float = 0.05, law: str = "rademacher", rng=None) -> TestReport:
    """Self-normalized test: ``S_{n,2}`` (KS) or ``T_{n,2}`` (CvM) against fixed quantiles."""
    _check_statistic(statistic)
    quantiles = quantiles or default_selfnorm_quantiles()
    proc = integrated_scedasis(values, k)
    rng = rng if rng is not None else np.random.default_rng(seed)
    result = selfnorm_decisions(proc, r, quantiles, alpha, rng, law)[statistic]
    if result is None:
        raise UninformativeTestError("self-normalizing denominator is zero; the test is uninformative")
    value, q, reject = result
    return TestReport(
        method=METHOD_NAMES[("selfnorm", statistic)], statistic=float(value), quantile=q, reject=bool(reject),
        alpha=alpha, config={"k": int(k), "n": proc.n, "r": int(r), "law": law, "seed": seed,
                             "quantile_paths": quantiles.paths, "quantile_grid": quantiles.grid,
                             "quantile_seed": quantiles.seed},
        notes=_notes(proc),
    )


def edhz_test(values, k: int, cvm_quantile_095: float = CVM_Q95) -> TestReport:
    """Cramer-von Mises test for independent data: reject if ``T_{n,1}`` exceeds the quantile."""
    proc = integrated_scedasis(values, k)
    t = cn_process_l2(proc)
    return TestReport(
        method="CvM-indep", statistic=t, quantile=float(cvm_quantile_095), reject=bool(t > cvm_quantile_095),
        alpha=0.05, config={"k": int(k), "n": proc.n}, notes=_notes(proc),
    )
