"""Monte Carlo experiment driver and CSV analysis.

Random numbers are keyed by ``(seed, model key, replicate, ...)`` through
:func:`hetextremes.simulate.rng_stream`, so every output is a function of
the experiment spec and the master seed only.  Replicates are the unit of parallel
work; results are collected in replicate order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError, HetExtremesError
from .extremal_index import SUGGESTED_BLOCK_SIZES, EiConfig, theta_from_curve
from .kernels import BoundaryKernel
from .scedasis import ScedasisConfig, as_series, cn_process_l2, cn_process_sup, integrated_scedasis, scedasis_estimate
from .simulate import (
    ARCH_THETA, FAMILY_KINDS, ScedasisFamily, arch_output, arch_path, armax_output, armax_path,
    resolve_kappa_prime, rng_stream,
)
from .testing import (
    CVM_Q95, METHOD_NAMES, BootstrapConfig, SelfNormQuantiles, bootstrap_decisions,
    default_selfnorm_quantiles, selfnorm_decisions,
)

SCHEMA_VERSION = 1
COLUMNS = ("model", "family", "beta", "k", "r", "q", "method", "metric", "value",
           "n_ok", "n_failed", "flagged", "N", "seed", "theta_true")
FAIL_FRACTION = 0.01
REJECTION_METHODS = ("CvM-boot", "KS-boot", "CvM-selfnorm", "KS-selfnorm", "CvM-indep")

# named models: (base process, lambda)
MODEL_ALIASES = {"indep": ("armax", 0.0), "armax": ("armax", 0.25), "arch": ("arch", 0.7)}


@dataclass(frozen=True)
class ModelSpec:
    """A base process with its parameter, e.g. ``armax:0.25``."""

    name: str
    kind: str
    lam: float

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        text = str(text).strip()
        if text in MODEL_ALIASES:
            kind, lam = MODEL_ALIASES[text]
            return cls(text, kind, lam)
        kind, sep, lam_text = text.partition(":")
        if not sep or kind not in ("armax", "arch"):
            raise ConfigError(f"unknown model {text!r}; use indep, armax, arch, armax:LAMBDA or arch:LAMBDA")
        try:
            lam = float(lam_text)
        except ValueError:
            raise ConfigError(f"model parameter in {text!r} is not a number") from None
        if kind == "armax" and not 0.0 <= lam < 1.0:
            raise ConfigError(f"ARMAX lambda must lie in [0, 1), got {lam}")
        if kind == "arch" and not 0.0 < lam < 1.0:
            raise ConfigError(f"ARCH lambda must lie in (0, 1), got {lam}")
        return cls(text, kind, lam)

    @property
    def key(self) -> int:
        # stable stream key, independent of the model order
        return zlib.crc32(f"{self.kind}:{self.lam!r}".encode())

    def base_path(self, n: int, rng: np.random.Generator, burn_in: int) -> np.ndarray:
        if self.kind == "armax":
            return armax_path(n, self.lam, rng)
        return arch_path(n, self.lam, rng, burn_in)

    def output(self, w: np.ndarray, fam: ScedasisFamily, kappa_prime: Optional[float]):
        if self.kind == "armax":
            return armax_output(w, self.lam, fam)
        return arch_output(w, self.lam, fam, resolve_kappa_prime(self.lam, kappa_prime))

    @property
    def theta_true(self) -> Optional[float]:
        if self.kind == "armax":
            return 1.0 - self.lam
        return ARCH_THETA.get(self.lam)


def _tuple(value, cast):
    if isinstance(value, (str, int, float)):
        value = [value]
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of a Monte Carlo experiment; the grid is models x families x betas x ks x (rs or qs)."""

    models: tuple = ("indep", "armax", "arch")
    families: tuple = ("c1",)
    betas: tuple = (1.0, 0.75, 0.5, 0.25)
    n: int = 2000
    ks: tuple = (100, 200)
    rs: tuple = (4, 8)
    qs: tuple = SUGGESTED_BLOCK_SIZES
    B: int = 200
    alpha: float = 0.05
    N: int = 200
    seed: int = 20240101
    h: float = 0.2
    kappa: float = 0.1
    G: int = 1024
    law: str = "rademacher"
    burn_in: int = 10_000
    kappa_prime: Optional[float] = None

    def __post_init__(self):
        conv = {"models": str, "families": str, "betas": float, "ks": int, "rs": int, "qs": int}
        for name, cast in conv.items():
            try:
                object.__setattr__(self, name, _tuple(getattr(self, name), cast))
            except (TypeError, ValueError):
                raise ConfigError(f"cannot read {name}={getattr(self, name)!r}") from None
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        for m in self.models:
            ModelSpec.parse(m)
        for f in self.families:
            if f not in FAMILY_KINDS:
                raise ConfigError(f"unknown family {f!r}; choose from {FAMILY_KINDS}")
        for b in self.betas:
            ScedasisFamily("c1", b)
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        for k in self.ks:
            if not 1 <= k < self.n:
                raise ConfigError(f"k={k} must satisfy 1 <= k < n={self.n}")
        ScedasisConfig(k=self.ks[0], h=self.h, kappa=self.kappa)
        if self.burn_in < 1000:
            raise ConfigError("burn_in must be at least 1000")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {unknown}")
        return cls(**data)

    def check_blocks(self) -> None:
        for r in self.rs:
            BootstrapConfig(r=r, B=self.B, law=self.law, alpha=self.alpha).check(self.n)

    def check_ei(self) -> None:
        for q in self.qs:
            EiConfig(q=q, k=self.ks[0], h=self.h, kappa=self.kappa, G=self.G).check(self.n)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @property
    def model_specs(self) -> list:
        return [ModelSpec.parse(m) for m in self.models]


@dataclass
class ResultTable:
    """Long-format results, one record per (cell, method, metric)."""

    records: list
    config: dict = field(default_factory=dict)
    kind: str = "rejection"
    schema_version: int = SCHEMA_VERSION

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# hetextremes result table; schema_version={self.schema_version}; kind={self.kind}\n")
        buf.write("# config=" + json.dumps(self.config, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in self.records:
            writer.writerow([_fmt(rec.get(c)) for c in COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text())

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        lines = Path(path).read_text().splitlines()
        meta, config, body = {}, {}, []
        for line in lines:
            if line.startswith("# config="):
                config = json.loads(line[len("# config="):])
            elif line.startswith("#"):
                for part in line[1:].split(";"):
                    key, sep, val = part.strip().partition("=")
                    if sep:
                        meta[key] = val
            else:
                body.append(line)
        rows = list(csv.DictReader(body))
        records = [{c: _parse(c, row[c]) for c in COLUMNS} for row in rows]
        return cls(records=records, config=config, kind=meta.get("kind", "rejection"),
                   schema_version=int(meta.get("schema_version", SCHEMA_VERSION)))

    def lookup(self, **where) -> list:
        return [r for r in self.records if all(r.get(k) == v for k, v in where.items())]

    def value(self, **where) -> float:
        hits = self.lookup(**where)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} records match {where}")
        return hits[0]["value"]


_INT_COLUMNS = {"k", "r", "q", "n_ok", "n_failed", "N", "seed"}
_FLOAT_COLUMNS = {"beta", "value", "theta_true"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(col: str, text: str):
    if text == "":
        return None
    if col == "flagged":
        return text == "true"
    if col in _INT_COLUMNS:
        return int(text)
    if col in _FLOAT_COLUMNS:
        return float(text)
    return text


def _run_replicates(fn, N: int, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(N)))
    return [fn(i) for i in range(N)]


def _families(spec: ExperimentSpec) -> list:
    return [ScedasisFamily(kind, beta) for kind in spec.families for beta in spec.betas]


def _rejection_replicate(spec: ExperimentSpec, model: ModelSpec, rep: int, quantiles: SelfNormQuantiles) -> dict:
    """Decisions for one replicate across all cells: ``{cell + method: bool or None}``.

    The base path and the multipliers are shared across families and betas.
    """
    out = {}
    fams = _families(spec)
    try:
        w = model.base_path(spec.n, rng_stream(spec.seed, model.key, rep, 0), spec.burn_in)
    except HetExtremesError:
        return out
    for fam in fams:
        try:
            x = model.output(w, fam, spec.kappa_prime).x
        except HetExtremesError:
            continue
        for k in spec.ks:
            try:
                proc = integrated_scedasis(x, k)
            except HetExtremesError:
                continue
            t = cn_process_l2(proc)
            out[(fam.kind, fam.beta, k, None, "CvM-indep")] = bool(t > CVM_Q95)
            for r in spec.rs:
                cfg = BootstrapConfig(r=r, B=spec.B, law=spec.law, alpha=spec.alpha)
                try:
                    boot = bootstrap_decisions(proc, cfg, rng_stream(spec.seed, model.key, rep, 1, k, r))
                    for stat, res in boot.items():
                        out[(fam.kind, fam.beta, k, r, METHOD_NAMES[("boot", stat)])] = bool(res[2])
                except HetExtremesError:
                    pass
                try:
                    sn = selfnorm_decisions(proc, r, quantiles, spec.alpha,
                                            rng_stream(spec.seed, model.key, rep, 2, k, r), spec.law)
                    for stat, res in sn.items():
                        out[(fam.kind, fam.beta, k, r, METHOD_NAMES[("selfnorm", stat)])] = (
                            None if res is None else bool(res[2]))
                except HetExtremesError:
                    pass
    return out


def _rejection_cells(spec: ExperimentSpec):
    for fam in _families(spec):
        for k in spec.ks:
            for r in spec.rs:
                for method in REJECTION_METHODS[:4]:
                    yield (fam.kind, fam.beta, k, r, method)
            yield (fam.kind, fam.beta, k, None, "CvM-indep")


def _record(model: ModelSpec, cell, metric: str, value, n_ok: int, spec: ExperimentSpec, q=None) -> dict:
    kind, beta, k, r, method = cell
    n_failed = spec.N - n_ok
    return {
        "model": model.name, "family": kind, "beta": float(beta), "k": int(k), "r": r, "q": q,
        "method": method, "metric": metric, "value": value, "n_ok": n_ok, "n_failed": n_failed,
        "flagged": n_failed > FAIL_FRACTION * spec.N, "N": spec.N, "seed": spec.seed,
        "theta_true": model.theta_true,
    }


def run_rejection_experiment(spec: ExperimentSpec, threads: int = 1,
                             quantiles: SelfNormQuantiles | None = None) -> ResultTable:
    """Empirical rejection rates of all five tests in every cell of the spec.

    A replicate whose computation fails for a method is excluded from that
    method's rate; a cell is flagged when more than 1% of replicates fail.
    """
    spec.check_blocks()
    quantiles = quantiles or default_selfnorm_quantiles()
    quantiles.get(spec.alpha, "CvM")
    if abs(spec.alpha - 0.05) > 1e-12:
        raise ConfigError("the independence CvM baseline is tabulated at alpha = 0.05 only")
    records = []
    for model in spec.model_specs:
        if model.kind == "arch":
            resolve_kappa_prime(model.lam, spec.kappa_prime)
        results = _run_replicates(lambda rep: _rejection_replicate(spec, model, rep, quantiles), spec.N, threads)
        for cell in _rejection_cells(spec):
            decisions = [res[cell] for res in results if res.get(cell) is not None]
            n_ok = len(decisions)
            rate = sum(decisions) / n_ok if n_ok else None
            records.append(_record(model, cell, "rejection_rate", rate, n_ok, spec))
    return ResultTable(records=records, config=spec.to_dict(), kind="rejection")


def _ei_replicate(spec: ExperimentSpec, model: ModelSpec, rep: int) -> dict:
    out = {}
    try:
        w = model.base_path(spec.n, rng_stream(spec.seed, model.key, rep, 0), spec.burn_in)
    except HetExtremesError:
        return out
    grid = np.linspace(0.0, 1.0, spec.G)
    for fam in _families(spec):
        try:
            x = model.output(w, fam, spec.kappa_prime).x
        except HetExtremesError:
            continue
        for k in spec.ks:
            try:
                curve = scedasis_estimate(x, ScedasisConfig(k=k, h=spec.h, kappa=spec.kappa, grid=grid))
            except HetExtremesError:
                continue
            for q in spec.qs:
                try:
                    est = theta_from_curve(x, curve, q, spec.G)
                except HetExtremesError:
                    continue
                out[(fam.kind, fam.beta, k, q)] = (est.theta1, est.theta2, est.clamped)
    return out


def run_ei_experiment(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    """MSE, bias and clamping frequency of both extremal-index estimators per (model, family, beta, k, q)."""
    spec.check_ei()
    records = []
    for model in spec.model_specs:
        theta = model.theta_true
        if theta is None:
            raise ConfigError(f"no known extremal index for model {model.name!r}")
        if model.kind == "arch":
            resolve_kappa_prime(model.lam, spec.kappa_prime)
        results = _run_replicates(lambda rep: _ei_replicate(spec, model, rep), spec.N, threads)
        for fam in _families(spec):
            for k in spec.ks:
                for q in spec.qs:
                    key = (fam.kind, fam.beta, k, q)
                    est = np.array([res[key] for res in results if key in res], dtype=float).reshape(-1, 3)
                    n_ok = est.shape[0]
                    for col, name in ((0, "theta1"), (1, "theta2")):
                        err = est[:, col] - theta
                        mse = float(np.mean(err**2)) if n_ok else None
                        bias = float(np.mean(err)) if n_ok else None
                        cell = (fam.kind, fam.beta, k, None, name)
                        records.append(_record(model, cell, "mse", mse, n_ok, spec, q=q))
                        records.append(_record(model, cell, "bias", bias, n_ok, spec, q=q))
                    clamp = float(est[:, 2].mean()) if n_ok else None
                    records.append(_record(model, (fam.kind, fam.beta, k, None, "any"), "clamp_rate",
                                           clamp, n_ok, spec, q=q))
    return ResultTable(records=records, config=spec.to_dict(), kind="ei")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series_csv(path, column=0) -> tuple[np.ndarray, Optional[str]]:
    """Read one numeric column; ``column`` is a header name or a 0-based index.

    A first row with any non-numeric cell is treated as a header.  Returns
    the values and the header name (None without header).
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    rows = [(i + 1, row) for i, row in enumerate(rows) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path} contains no data")
    header = None
    if any(not _is_number(c.strip()) for c in rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if isinstance(column, str) and not column.lstrip("-").isdigit():
        if header is None or column not in header:
            raise ConfigError(f"column {column!r} not found; header is {header}")
        idx = header.index(column)
    else:
        idx = int(column)
        width = len(header) if header else len(rows[0][1]) if rows else 0
        if not 0 <= idx < width:
            raise ConfigError(f"column index {idx} out of range for {width} columns")
    values, missing = [], []
    for line, row in rows:
        cell = row[idx].strip() if idx < len(row) else ""
        if cell == "":
            missing.append(line)
            continue
        try:
            values.append(float(cell))
        except ValueError:
            raise DataError(f"row {line}, column {idx + 1}: non-numeric value {cell!r}") from None
    if missing:
        raise DataError(f"missing values in column {idx + 1} at rows {missing[:20]}")
    name = header[idx] if header else None
    return as_series(values), name


def analyze_csv(path, column=0, k: int = 200, r: int = 4, q: Optional[int] = 32, h: float = 0.2,
                kappa: float = 0.1, alpha: float = 0.05, B: int = 200, seed: int = 0,
                out_dir=None, grid_size: int = 512) -> dict:
    """Scedasis curve, bootstrap and self-normalized tests and extremal-index estimates for one series.

    With ``out_dir`` set, writes ``report.json``, ``scedasis_curve.csv``,
    ``cn_path.csv`` and ``bootstrap_replicates.csv``.
    """
    x, name = read_series_csv(path, column)
    n = x.size
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    curve = scedasis_estimate(x, ScedasisConfig(k=k, h=h, kappa=kappa, grid=grid), BoundaryKernel(h=h))
    proc = integrated_scedasis(x, k)
    cfg = BootstrapConfig(r=r, B=B, alpha=alpha, seed=seed)
    cfg.check(n)
    boot = bootstrap_decisions(proc, cfg, rng_stream(seed, 1))
    sup_reps, l2_reps = boot["KS"][4], boot["CvM"][4]
    sn = selfnorm_decisions(proc, r, default_selfnorm_quantiles(), alpha, rng_stream(seed, 2))
    tests = {}
    for stat in ("KS", "CvM"):
        obs, qv, rej, pval, _ = boot[stat]
        tests[METHOD_NAMES[("boot", stat)]] = {"statistic": float(obs), "quantile": qv, "reject": bool(rej),
                                               "p_value": pval}
        res = sn[stat]
        tests[METHOD_NAMES[("selfnorm", stat)]] = (
            {"statistic": None, "quantile": None, "reject": None, "note": "zero denominator"} if res is None
            else {"statistic": float(res[0]), "quantile": res[1], "reject": bool(res[2])})
    ei = None
    if q is not None:
        est = theta_from_curve(x, curve, q, grid_size + 1)
        ei = est.to_dict()
    report = {
        "input": str(path), "column": column, "header": name, "n": n,
        "config": {"k": k, "r": r, "q": q, "h": h, "kappa": kappa, "alpha": alpha, "B": B, "seed": seed},
        "scedasis": curve.to_dict(), "statistics": {"sup": cn_process_sup(proc), "l2": cn_process_l2(proc)},
        "tests": tests, "extremal_index": ei,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        np.savetxt(out / "scedasis_curve.csv", np.column_stack([grid, curve.raw, curve.values]),
                   delimiter=",", header="s,c_raw,c_truncated", comments="", fmt="%.17g")
        starts, ends, vals = proc.pieces()
        s_path = np.column_stack([starts, ends]).ravel()
        c_path = math.sqrt(k) * (np.repeat(vals, 2) - s_path)
        np.savetxt(out / "cn_path.csv", np.column_stack([s_path, c_path]), delimiter=",",
                   header="s,Cn", comments="", fmt="%.17g")
        np.savetxt(out / "bootstrap_replicates.csv",
                   np.column_stack([np.arange(1, sup_reps.size + 1), sup_reps, l2_reps]),
                   delimiter=",", header="b,KS,CvM", comments="", fmt=["%d", "%.17g", "%.17g"])
    return report


__all__ = [
    "SCHEMA_VERSION", "ModelSpec", "ExperimentSpec", "ResultTable", "run_rejection_experiment",
    "run_ei_experiment", "read_series_csv", "analyze_csv",
]
