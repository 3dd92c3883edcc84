import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetextremes import extremal_index as ei
from hetextremes.empirical_process import TruthModel
from hetextremes.errors import ConfigError, EstimationError
from hetextremes.extremal_index import (
    EiConfig, block_pseudo_obs, tau_hat, theta_estimators, theta_from_curve, true_pseudo_obs,
)
from hetextremes.scedasis import ScedasisConfig, scedasis_estimate
from hetextremes.simulate import ScedasisFamily, rng_stream, simulate_armax

perm_series = st.integers(0, 2**31).map(lambda s: np.random.default_rng(s).permutation(20).astype(float) + 1)


def test_global_max_block_is_zero():
    x = np.array([1.0, 9.0, 2.0, 3.0, 4.0, 5.0])
    z = block_pseudo_obs(x, 2)
    assert z[0] == 0.0 and z.size == 3


@given(perm_series, st.sampled_from([2, 3, 4, 6]))
def test_rank_oracle(x, q):
    n = x.size
    z = block_pseudo_obs(x, q)
    ranks = np.argsort(np.argsort(x)) + 1
    kp = n // q
    expected = [q * (n - ranks[j * q:(j + 1) * q].max()) / n for j in range(kp)]
    assert np.allclose(z, expected, atol=1e-14)
    assert np.all((z >= 0) & (z <= q))


def test_constant_series():
    assert np.all(block_pseudo_obs(np.ones(30), 5) == 0)


def test_partial_block_dropped():
    assert block_pseudo_obs(np.arange(23.0), 5).size == 4


@pytest.mark.parametrize("q", [1, 10, 12, 2.5])
def test_block_size_rejected(q):
    with pytest.raises(ConfigError):
        block_pseudo_obs(np.arange(10.0), q)


@given(perm_series, st.integers(0, 4))
def test_antitone_in_block_max(x, j):
    q = 4
    z = block_pseudo_obs(x, q)
    y = x.copy()
    idx = j * q + int(np.argmax(x[j * q:(j + 1) * q]))
    y[idx] = x.max() + 1
    assert block_pseudo_obs(y, q)[j] <= z[j]


@given(perm_series)
def test_rank_invariance(x):
    assert np.array_equal(block_pseudo_obs(x, 4), block_pseudo_obs(np.exp(x / 3) - 2, 4))


def test_true_pseudo_obs_definition():
    q = 8
    xs = np.array([0.1, 0.5, 2.0])
    truth = TruthModel(cdf=lambda v: 1 - np.asarray(v) / q, quantile=None, scedasis=None, integrated=None, c_max=1)
    series = np.repeat(xs, q)
    z = true_pseudo_obs(series, truth, q)
    assert np.allclose(z, xs)
    with pytest.raises(ConfigError):
        true_pseudo_obs(series, None, q)


def test_true_pseudo_obs_iid_mean():
    n, q = 64 * 2000, 64
    sim = simulate_armax(n, 0.0, ScedasisFamily("c1", 1.0), rng_stream(50, 0))
    z = true_pseudo_obs(sim.x, sim.truth, q)
    assert np.all((z >= 0) & (z <= q))
    assert abs(z.mean() - 1.0) < 3 * z.std(ddof=1) / np.sqrt(z.size)


def _curve(values, kappa=0.1, G=1024):
    x = np.random.default_rng(0).standard_normal(400)
    curve = scedasis_estimate(x, ScedasisConfig(k=40, h=0.2, kappa=kappa, grid=np.linspace(0, 1, G)))
    object.__setattr__(curve, "values", np.broadcast_to(values, (G,)).astype(float))
    return curve


def test_tau_constant_curves():
    assert abs(tau_hat(_curve(1.0)) - 1) < 1e-14
    assert abs(tau_hat(_curve(0.1)) - 10) < 1e-12


def test_tau_against_riemann_oracle():
    grid = np.linspace(0, 1, 1024)
    vals = np.where(grid < 0.4, 0.5 + grid, 2.0 - grid)
    curve = _curve(vals)
    s = (np.arange(1_000_000) + 0.5) / 1_000_000
    assert abs(tau_hat(curve) - np.mean(np.interp(s, grid, 1 / vals))) < 1e-6


def test_tau_rejects_nonpositive_kappa():
    with pytest.raises(ConfigError):
        tau_hat(_curve(1.0, kappa=0.0))
    with pytest.raises(ConfigError):
        EiConfig(q=8, k=10, kappa=0.0)


def test_ratio_identity(monkeypatch):
    x = simulate_armax(2000, 0.25, ScedasisFamily("c2", 0.5), rng_stream(51, 0)).x
    curve = scedasis_estimate(x, ScedasisConfig(k=200, grid=np.linspace(0, 1, 1024)))
    tau = tau_hat(curve)
    monkeypatch.setattr(ei, "block_pseudo_obs", lambda values, q: np.full(len(values) // q, tau))
    est = theta_from_curve(x, curve, 32)
    assert abs(est.theta1_raw - 1.0) < 1e-12


def test_zero_T_raises():
    with pytest.raises(EstimationError):
        theta_estimators(np.ones(200), EiConfig(q=10, k=20))


def test_clamp_flag_and_json():
    flagged = None
    for seed in range(200):
        x = simulate_armax(2000, 0.0, ScedasisFamily("c1", 1.0), rng_stream(52, seed)).x
        est = theta_estimators(x, EiConfig(q=32, k=200))
        assert 0 < est.theta1 <= 1 and 0 < est.theta2 <= 1
        if est.clamped:
            flagged = est
            break
    assert flagged is not None
    assert max(flagged.theta1_raw, flagged.theta2_raw) > 1
    data = json.loads(flagged.to_json())
    assert data["clamped"] and data["config"]["q"] == 32 and data["n_blocks"] == 62


def test_config_checks():
    with pytest.raises(ConfigError):
        EiConfig(q=1, k=10)
    with pytest.raises(ConfigError):
        EiConfig(q=8, k=10).check(8)
    with pytest.raises(ConfigError):
        EiConfig(q=8, k=10).check(15)
    assert EiConfig(q=8, k=10).check(100) == 12


def test_armax_theta2_mean_near_truth():
    est = [theta_estimators(simulate_armax(2000, 0.25, ScedasisFamily("c2", 0.5), rng_stream(53, s)).x,
                            EiConfig(q=32, k=400)).theta2 for s in range(100)]
    assert abs(np.mean(est) - 0.75) < 0.1


def test_estimators_agree_under_homoscedasticity():
    t1, t2 = [], []
    for s in range(100):
        x = simulate_armax(2000, 0.25, ScedasisFamily("c1", 1.0), rng_stream(54, s)).x
        est = theta_estimators(x, EiConfig(q=32, k=400))
        t1.append(est.theta1)
        t2.append(est.theta2)
    assert abs(np.mean(t1) - np.mean(t2)) < 0.05


@given(st.integers(0, 1000))
def test_estimators_rank_invariant(seed):
    x = simulate_armax(600, 0.25, ScedasisFamily("c2", 0.5), rng_stream(55, seed)).x
    a = theta_estimators(x, EiConfig(q=16, k=60, G=128))
    b = theta_estimators(np.log(x), EiConfig(q=16, k=60, G=128))
    assert a.theta1_raw == b.theta1_raw and a.theta2_raw == b.theta2_raw
