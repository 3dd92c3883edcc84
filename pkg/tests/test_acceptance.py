"""Acceptance criteria; each test prints one PASS/FAIL line with the measured value."""
import time

import numpy as np
import pytest
from scipy import integrate

from hetextremes.cli import main
from hetextremes.experiments import ExperimentSpec, run_ei_experiment, run_rejection_experiment
from hetextremes.extremal_index import true_pseudo_obs
from hetextremes.kernels import BoundaryKernel
from hetextremes.scedasis import cn_process_l2, cn_process_sup, integrated_scedasis
from hetextremes.simulate import ScedasisFamily, arch_path, hill_estimator, rng_stream, simulate_armax

from oracles import grid_l2, grid_sup


def report(capsys, number, ok, detail, started):
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} {detail} ({time.perf_counter() - started:.1f} s)")


@pytest.fixture
def clock():
    return time.perf_counter()


def test_criterion_01_boundary_kernel_identities(capsys, clock):
    bk = BoundaryKernel(h=0.2)
    worst = 0.0
    for p in np.linspace(0.0, 1.0, 101):
        for s, lo, hi in ((p * bk.h, -1.0, p), (1.0 - p * bk.h, -p, 1.0)):
            m0 = integrate.quad(lambda x: bk(x, s), lo, hi, epsabs=1e-13)[0]
            m1 = integrate.quad(lambda x: x * bk(x, s), lo, hi, epsabs=1e-13)[0]
            worst = max(worst, abs(m0 - 1.0), abs(m1))
    elapsed = time.perf_counter() - clock
    ok = worst < 1e-8 and elapsed < 5
    report(capsys, 1, ok, f"max moment error {worst:.2e}", clock)
    assert ok


def test_criterion_02_exact_integration(capsys, clock):
    rng = np.random.default_rng(2)
    worst_l2 = worst_sup = 0.0
    for _ in range(100):
        x = rng.standard_normal(500)
        k = int(rng.integers(10, 200))
        proc = integrated_scedasis(x, k)
        worst_l2 = max(worst_l2, abs(cn_process_l2(proc) - grid_l2(x, k)))
        worst_sup = max(worst_sup, abs(cn_process_sup(proc) - grid_sup(x, k)))
    elapsed = time.perf_counter() - clock
    ok = worst_l2 < 1e-6 and worst_sup < 1e-9 and elapsed < 30
    report(capsys, 2, ok, f"L2 gap {worst_l2:.2e}, sup gap {worst_sup:.2e}", clock)
    assert ok


def _rate(spec, **where):
    return run_rejection_experiment(spec).value(**where)


def test_criterion_03_bootstrap_level(capsys, clock):
    spec = ExperimentSpec(models=("indep",), betas=(1.0,), ks=(200,), rs=(4,), N=200, B=200)
    rate = _rate(spec, method="CvM-boot")
    ok = 0 <= rate <= 0.06
    report(capsys, 3, ok, f"rate {rate:.3f} (bound 0.06)", clock)
    assert ok


def test_criterion_04_bootstrap_power(capsys, clock):
    spec = ExperimentSpec(models=("arch",), families=("c2",), betas=(0.25,), ks=(200,), rs=(4,), N=200, B=200)
    rate = _rate(spec, method="CvM-boot")
    ok = rate >= 0.95
    report(capsys, 4, ok, f"rate {rate:.3f} (bound 0.95)", clock)
    assert ok


def test_criterion_05_selfnorm_level(capsys, clock):
    spec = ExperimentSpec(models=("indep",), betas=(1.0,), ks=(200,), rs=(4,), N=200, B=200)
    rate = _rate(spec, method="CvM-selfnorm")
    ok = rate <= 0.07
    report(capsys, 5, ok, f"rate {rate:.3f} (bound 0.07)", clock)
    assert ok


def test_criterion_06_independence_baseline_fails_under_dependence(capsys, clock):
    spec = ExperimentSpec(models=("armax",), betas=(1.0,), ks=(100,), rs=(4,), N=200, B=200)
    table = run_rejection_experiment(spec)
    indep_rate, boot = table.value(method="CvM-indep"), table.value(method="CvM-boot")
    ok = indep_rate >= 0.10 and boot <= 0.12
    report(capsys, 6, ok, f"independence CvM {indep_rate:.3f} (>= 0.10), bootstrap {boot:.3f} (<= 0.12)", clock)
    assert ok


def test_criterion_07_extremal_index(capsys, clock):
    spec = ExperimentSpec(models=("armax", "arch"), families=("c2",), betas=(0.5,), ks=(400,), qs=(32,),
                          N=100, h=0.2, kappa=0.1)
    table = run_ei_experiment(spec)
    parts, ok = [], True
    for model in ("armax", "arch"):
        rmse = np.sqrt(table.value(model=model, method="theta2", metric="mse"))
        bias = table.value(model=model, method="theta2", metric="bias")
        ok &= rmse <= 0.15 and abs(bias) <= 0.10
        parts.append(f"{model} RMSE {rmse:.3f} bias {bias:+.3f}")
    report(capsys, 7, ok, "; ".join(parts) + " (bounds 0.15, 0.10)", clock)
    assert ok


def test_criterion_08_block_pseudo_obs_mean(capsys, clock):
    n, q, window = 64_000, 64, 0.05
    fam = ScedasisFamily("c1", 0.5)
    kp = n // q
    mid = (np.arange(kp) + 0.5) / kp
    near = np.abs(mid - 0.5) <= window
    z = []
    for seed in range(20):
        sim = simulate_armax(n, 0.25, fam, rng_stream(80, seed))
        z.append(true_pseudo_obs(sim.x, sim.truth, q)[near])
    z = np.concatenate(z)
    target = 1.0 / (0.75 * fam.c(0.5))
    se = z.std(ddof=1) / np.sqrt(z.size)
    ok = abs(z.mean() - target) <= 3 * se
    report(capsys, 8, ok, f"mean {z.mean():.4f} vs {target:.4f}, {abs(z.mean() - target) / se:.2f} SE", clock)
    assert ok


def test_criterion_09_arch_tail_index(capsys, clock):
    w = arch_path(1_000_000, 0.7, rng_stream(90, 0), burn_in=10_000)
    est = hill_estimator(np.abs(w), 10_000)
    est_sq = hill_estimator(w**2, 10_000)
    ok = abs(est - 1.586) <= 0.1 * 1.586
    report(capsys, 9, ok, f"Hill on |W| {est:.3f} vs 1.586 (Hill on W^2 {est_sq:.3f})", clock)
    assert ok


def test_criterion_10_thread_determinism(capsys, clock, tmp_path):
    args = ["experiment", "table1", "--N", "20", "--B", "50", "--seed", "11"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "4", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "table1.csv").read_bytes()
    b = (tmp_path / "b" / "table1.csv").read_bytes()
    ok = a == b
    report(capsys, 10, ok, f"identical={ok} ({len(a)} bytes)", clock)
    assert ok
