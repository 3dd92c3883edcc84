"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .empirical_process import simple_step, step, write_matrix_csv
from .errors import ConfigError, DataError, EstimationError, UninformativeTestError
from .experiments import ExperimentSpec, ModelSpec, analyze_csv, read_series_csv, run_ei_experiment, run_rejection_experiment
from .extremal_index import EiConfig, theta_estimators
from .kernels import BoundaryKernel
from .scedasis import ScedasisConfig, scedasis_estimate
from .simulate import ARCH_TABLE_SEED, ScedasisFamily, build_arch_marginal, rng_stream
from .testing import (
    DEFAULT_ALPHAS, SELFNORM_GRID, SELFNORM_PATHS, SELFNORM_SEED, BootstrapConfig, bootstrap_test, edhz_test,
    selfnorm_reference_quantiles, selfnorm_test,
)

EXPLORATION_BANDWIDTHS = (0.03, 0.11, 0.19, 0.27)
TABLE1_DEFAULTS = dict(models=("indep", "armax", "arch"), families=("c1",), betas=(1.0, 0.75, 0.5, 0.25),
                       ks=(100, 200), rs=(4, 8))
MSE_DEFAULTS = dict(models=("arch",), families=("c2",), betas=(1.0, 0.75, 0.5, 0.25), ks=(300, 400),
                    qs=(8, 16, 32, 64, 128, 256), N=100)


def _csv_list(cast):
    def parse(text):
        try:
            return tuple(cast(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse list {text!r}") from None
    return parse


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of keys to values")
    return data


def _merge(args, defaults: dict, keys) -> dict:
    """Defaults, then config file, then explicit command-line flags."""
    merged = dict(defaults)
    merged.update(_load_config(args.config))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, default=float) + "\n")


def _family(args) -> ScedasisFamily:
    return ScedasisFamily(args.family, args.beta)


def cmd_simulate(args) -> int:
    model = ModelSpec.parse(args.model)
    rng = rng_stream(args.seed, 0)
    w = model.base_path(args.n, rng, args.burn_in)
    sim = model.output(w, _family(args), args.kappa_prime)
    out = _out_dir(args)
    sim.to_csv(out / "series.csv")
    _write_json(out / "series.json", {**sim.description, "seed": args.seed, "theta_true": sim.truth.theta})
    print(out / "series.csv")
    return 0


def cmd_step(args) -> int:
    model = ModelSpec.parse(args.model)
    w = model.base_path(args.n, rng_stream(args.seed, 0), args.burn_in)
    sim = model.output(w, _family(args), args.kappa_prime)
    grid_s = np.linspace(0.0, 1.0, args.grid_s)
    grid_x = np.linspace(0.0, args.x_max, args.grid_x)
    out = _out_dir(args)
    write_matrix_csv(out / "simple_step.csv", simple_step(sim.u, sim.truth, args.k, grid_s, grid_x), grid_s, grid_x)
    write_matrix_csv(out / "step.csv", step(sim.x, sim.truth, args.k, grid_s, grid_x), grid_s, grid_x)
    print(out)
    return 0


def cmd_scedasis(args) -> int:
    x, header = read_series_csv(args.input, args.column)
    grid = np.linspace(0.0, 1.0, args.grid_size + 1)
    columns, names = [grid], ["s"]
    meta = []
    for h in args.h or EXPLORATION_BANDWIDTHS:
        curve = scedasis_estimate(x, ScedasisConfig(k=args.k, h=h, kappa=args.kappa, grid=grid),
                                  BoundaryKernel(h=h))
        columns.append(curve.values)
        names.append(f"c_h{h:g}")
        meta.append(curve.to_dict())
    out = _out_dir(args)
    np.savetxt(out / "scedasis.csv", np.column_stack(columns), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")
    _write_json(out / "scedasis.json", {"input": args.input, "header": header, "curves": meta})
    print(out / "scedasis.csv")
    return 0


def cmd_test(args) -> int:
    x, header = read_series_csv(args.input, args.column)
    reports = []
    methods = ("boot", "selfnorm", "edhz") if args.method == "all" else (args.method,)
    stats = ("KS", "CvM") if args.statistic == "both" else (args.statistic,)
    for method in methods:
        if method == "edhz":
            reports.append(edhz_test(x, args.k))
            continue
        for stat in stats:
            # both statistics share one multiplier stream, as in the harness
            if method == "boot":
                cfg = BootstrapConfig(r=args.r, B=args.B, law=args.law, alpha=args.alpha, seed=args.seed)
                reports.append(bootstrap_test(x, args.k, cfg, stat, rng=rng_stream(args.seed, 1)))
            else:
                reports.append(selfnorm_test(x, args.k, args.r, stat, alpha=args.alpha, law=args.law,
                                             seed=args.seed, rng=rng_stream(args.seed, 2)))
    payload = {"input": args.input, "header": header, "n": int(x.size), "reports": [r.to_dict() for r in reports]}
    text = json.dumps(payload, indent=2, default=float)
    if args.out:
        out = _out_dir(args)
        (out / "tests.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_ei(args) -> int:
    x, header = read_series_csv(args.input, args.column)
    est = theta_estimators(x, EiConfig(q=args.q, k=args.k, h=args.h, kappa=args.kappa, G=args.G))
    payload = {"input": args.input, "header": header, **est.to_dict()}
    text = json.dumps(payload, indent=2, default=float)
    if args.out:
        (_out_dir(args) / "ei.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_analyze(args) -> int:
    report = analyze_csv(args.input, args.column, k=args.k, r=args.r, q=args.q, h=args.h, kappa=args.kappa,
                         alpha=args.alpha, B=args.B, seed=args.seed, out_dir=args.out)
    print(json.dumps(report["tests"], indent=2, default=float))
    return 0


_SPEC_KEYS = ("models", "families", "betas", "n", "ks", "rs", "qs", "B", "alpha", "N", "seed", "h", "kappa",
              "G", "law", "burn_in", "kappa_prime")


def _experiment_spec(args, defaults) -> ExperimentSpec:
    merged = _merge(args, {**defaults, "seed": args.seed}, [k for k in _SPEC_KEYS if k != "seed"])
    if args.seed_given:
        merged["seed"] = args.seed
    return ExperimentSpec.from_dict(merged)


def cmd_table1(args) -> int:
    spec = _experiment_spec(args, TABLE1_DEFAULTS)
    table = run_rejection_experiment(spec, threads=args.threads)
    out = _out_dir(args)
    table.write_csv(out / "table1.csv")
    print(out / "table1.csv")
    return 0


def cmd_mse(args) -> int:
    spec = _experiment_spec(args, MSE_DEFAULTS)
    table = run_ei_experiment(spec, threads=args.threads)
    out = _out_dir(args)
    table.write_csv(out / "mse.csv")
    print(out / "mse.csv")
    return 0


def cmd_quantiles_selfnorm(args) -> int:
    q = selfnorm_reference_quantiles(args.alphas, paths=args.paths, grid_size=args.grid, seed=args.seed,
                                     threads=args.threads, cache=False)
    out = _out_dir(args)
    q.to_csv(out / "selfnorm_quantiles.csv")
    print(out / "selfnorm_quantiles.csv")
    return 0


def cmd_quantiles_arch(args) -> int:
    marginal = build_arch_marginal(args.lam, n_sim=args.n_sim, seed=args.seed)
    out = _out_dir(args)
    path = out / f"arch_quantiles_lam{args.lam:g}.csv"
    marginal.to_csv(path)
    print(path)
    return 0


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def _common(p, seed_default=0, out_default="out"):
    p.add_argument("--seed", type=int, default=seed_default, action=_SeedAction, help="master seed")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--config", default=None, help="YAML file with parameter values (flags override)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (affects speed only)")
    p.set_defaults(seed_given=False)


def _input(p):
    p.add_argument("input", help="CSV file")
    p.add_argument("--column", default="0", help="column name or 0-based index")


def _model(p):
    p.add_argument("--model", default="indep", help="indep, armax, arch, armax:LAMBDA or arch:LAMBDA")
    p.add_argument("--family", default="c1", choices=["c1", "c2", "c1-threshold", "c2-threshold"])
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=10_000)
    p.add_argument("--kappa-prime", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetextremes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one series (index, X, W, U)")
    _model(p)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("step", help="dump simple STEP and STEP matrices for a simulated series")
    _model(p)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--grid-s", type=int, default=65)
    p.add_argument("--grid-x", type=int, default=65)
    p.add_argument("--x-max", type=float, default=1.0)
    _common(p)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("scedasis", help="scedasis curves for one or more bandwidths")
    _input(p)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--h", type=float, action="append", help="bandwidth; repeat for several")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--grid-size", type=int, default=512)
    _common(p)
    p.set_defaults(func=cmd_scedasis)

    p = sub.add_parser("test", help="tests of homoscedastic extremes")
    _input(p)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--method", choices=["boot", "selfnorm", "edhz", "all"], default="all")
    p.add_argument("--statistic", choices=["KS", "CvM", "both"], default="CvM")
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--law", default="rademacher", choices=["rademacher", "mammen", "uniform"])
    _common(p, out_default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ei", help="extremal-index estimates")
    _input(p)
    p.add_argument("--q", type=int, required=True, help="block size, e.g. 8, 16, 32, 64, 128 or 256")
    p.add_argument("--k", type=int, default=400)
    p.add_argument("--h", type=float, default=0.2)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--G", type=int, default=1024)
    _common(p, out_default=None)
    p.set_defaults(func=cmd_ei)

    p = sub.add_parser("analyze", help="scedasis curve, tests and extremal index for a CSV column")
    _input(p)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--h", type=float, default=0.2)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--B", type=int, default=200)
    _common(p)
    p.set_defaults(func=cmd_analyze)

    exp = sub.add_parser("experiment", help="Monte Carlo experiments").add_subparsers(dest="experiment", required=True)
    for name, func, grid_flag in (("table1", cmd_table1, "rs"), ("mse", cmd_mse, "qs")):
        p = exp.add_parser(name, help="rejection rates" if name == "table1" else "extremal-index MSE curves")
        p.add_argument("--models", type=_csv_list(str))
        p.add_argument("--families", type=_csv_list(str))
        p.add_argument("--betas", type=_csv_list(float))
        p.add_argument("--ks", type=_csv_list(int))
        p.add_argument(f"--{grid_flag}", type=_csv_list(int))
        for flag, cast in (("n", int), ("B", int), ("alpha", float), ("N", int), ("h", float),
                           ("kappa", float), ("G", int), ("law", str), ("kappa_prime", float)):
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=cast)
        p.add_argument("--burn-in", dest="burn_in", type=int)
        _common(p, seed_default=20240101)
        p.set_defaults(func=func)

    qp = sub.add_parser("quantiles", help="reference tables").add_subparsers(dest="table", required=True)
    p = qp.add_parser("selfnorm", help="quantiles of the self-normalized limits")
    p.add_argument("--alphas", type=_csv_list(float), default=DEFAULT_ALPHAS)
    p.add_argument("--paths", type=int, default=SELFNORM_PATHS)
    p.add_argument("--grid", type=int, default=SELFNORM_GRID)
    _common(p, seed_default=SELFNORM_SEED)
    p.set_defaults(func=cmd_quantiles_selfnorm)
    p = qp.add_parser("arch", help="ARCH stationary quantile table")
    p.add_argument("--lam", type=float, default=0.7)
    p.add_argument("--n-sim", type=int, default=10_000_000)
    _common(p, seed_default=ARCH_TABLE_SEED)
    p.set_defaults(func=cmd_quantiles_arch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, UninformativeTestError, EstimationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
