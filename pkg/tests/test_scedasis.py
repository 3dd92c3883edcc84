import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hetextremes.errors import ConfigError, DataError
from hetextremes.kernels import BoundaryKernel
from hetextremes.scedasis import (
    ScedasisConfig, cn_process_l2, cn_process_sup, default_grid, exceedance_indicators, integrated_scedasis,
    scedasis_estimate,
)
from hetextremes.simulate import ScedasisFamily, rng_stream, simulate_armax

from oracles import brute_indicators, grid_l2, grid_sup

distinct_series = st.integers(5, 60).flatmap(
    lambda n: st.permutations(list(range(n))).map(lambda p: np.array(p, dtype=float) + 0.5))


def test_indicators_small_example():
    ind, thr = exceedance_indicators([1, 4, 2, 3], 2)
    assert thr == 2
    assert ind.tolist() == [False, True, False, True]


def test_indicators_all_tied():
    ind, thr = exceedance_indicators([5, 5, 5, 5], 2)
    assert thr == 5 and not ind.any()


def test_indicators_k_n_minus_one():
    x = np.array([3.0, 1.0, 1.0, 7.0, 2.0])
    ind, _ = exceedance_indicators(x, 4)
    assert ind.tolist() == (x > 1.0).tolist()


@pytest.mark.parametrize("k", [0, 4, 5, 2.5])
def test_indicators_reject_k(k):
    with pytest.raises(ConfigError):
        exceedance_indicators([1, 2, 3, 4], k)


@pytest.mark.parametrize("bad", [[1.0], [[1, 2], [3, 4]], [1.0, np.nan, 2.0], [1.0, np.inf]])
def test_series_validation(bad):
    with pytest.raises(DataError):
        exceedance_indicators(bad, 1)


@given(distinct_series, st.data())
def test_indicators_match_brute_force(x, data):
    k = data.draw(st.integers(1, x.size - 1))
    ind, thr = exceedance_indicators(x, k)
    ref, ref_thr = brute_indicators(x, k)
    assert thr == ref_thr and np.array_equal(ind, ref) and ind.sum() == k


def test_integrated_small_example():
    proc = integrated_scedasis([1, 4, 2, 3], 2)
    assert proc.C_hat(0.5) == 0.5
    assert proc.C_hat(0.0) == 0.0
    assert proc.C_hat(1.0) == 1.0


@given(distinct_series, st.data())
def test_C_hat_step_properties(x, data):
    k = data.draw(st.integers(1, x.size - 1))
    proc = integrated_scedasis(x, k)
    s = np.linspace(0, 1, 501)
    c = proc.C_hat(s)
    assert c[0] == 0.0 and c[-1] == 1.0
    assert np.all(np.diff(c) >= 0)
    jumps = np.diff(c)[np.diff(c) > 0]
    assert np.allclose(jumps * k, np.round(jumps * k))


def test_sup_l2_two_point_examples():
    # exceedance at index 1: C_hat = 0 on [0, 1/2), 1 on [1/2, 1]
    proc = integrated_scedasis([2.0, 1.0], 1)
    assert abs(cn_process_sup(proc) - 0.5) < 1e-15
    assert abs(cn_process_l2(proc) - 1.0 / 12.0) < 1e-15
    # exceedance at index 2: C_hat = 0 on [0, 1), so the sup is the left limit 1 at s = 1
    proc = integrated_scedasis([1.0, 2.0], 1)
    assert abs(cn_process_sup(proc) - 1.0) < 1e-15
    assert abs(cn_process_l2(proc) - 1.0 / 3.0) < 1e-15


def test_degenerate_no_exceedance():
    proc = integrated_scedasis([5.0] * 10, 3)
    assert proc.n_exceed == 0
    assert abs(cn_process_sup(proc) - np.sqrt(3)) < 1e-12
    assert abs(cn_process_l2(proc) - 1.0) < 1e-12


def test_sup_sorted_increasing_against_fine_grid():
    n = 100
    x = np.arange(n, dtype=float)
    proc = integrated_scedasis(x, n - 1)
    assert abs(cn_process_sup(proc) - grid_sup(x, n - 1, 1_000_000)) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_exact_vs_grid_random(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(500)
    k = int(rng.integers(1, 499))
    proc = integrated_scedasis(x, k)
    assert abs(cn_process_sup(proc) - grid_sup(x, k)) < 1e-9
    assert abs(cn_process_l2(proc) - grid_l2(x, k)) < 1e-6


transforms = [np.exp, lambda v: v**3 + v, lambda v: np.arctan(v) * 7 - 2]


@given(arrays(np.int64, st.integers(10, 80), elements=st.integers(-1000, 1000)), st.integers(0, 2), st.data())
def test_rank_invariance(x, t, data):
    k = data.draw(st.integers(1, x.size - 1))
    # integer-valued input keeps the transforms strictly increasing in floating point
    x = x / 1e2
    y = transforms[t](x)
    px, py = integrated_scedasis(x, k), integrated_scedasis(y, k)
    assert np.array_equal(px.positions, py.positions)
    assert cn_process_sup(px) == cn_process_sup(py)
    assert cn_process_l2(px) == cn_process_l2(py)


def test_single_exceedance_kernel_value():
    # one exceedance at index 50 of n=100, k=2 with h=0.5 and evaluation at s=0.5
    x = np.zeros(100)
    x[49] = 10.0
    x[0] = -1.0
    cfg = ScedasisConfig(k=2, h=0.45, kappa=0.0, grid=np.array([0.5]))
    curve = scedasis_estimate(x, cfg)
    # only index 50 exceeds the threshold 0 (strict), so the sum has a single term
    assert curve.n_exceed == 1
    assert abs(curve.raw[0] - 0.9375 / (2 * 0.45)) < 1e-12


def test_single_term_example_interior_h_half_limit():
    # h must stay below 1/2; at s = 1/2 with h close to 1/2 the point is interior
    x = np.array([0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, -1.0])
    cfg = ScedasisConfig(k=2, h=0.49, kappa=0.0, grid=np.array([0.5]))
    curve = scedasis_estimate(x, cfg)
    assert abs(curve.raw[0] - 0.9375 / (2 * 0.49)) < 1e-12


def test_no_exceedance_near_s_gives_zero():
    x = np.zeros(1000)
    x[:10] = np.arange(1, 11)
    curve = scedasis_estimate(x, ScedasisConfig(k=10, h=0.1, kappa=0.0, grid=np.array([0.5, 0.9])))
    assert np.all(curve.raw == 0.0)


def test_truncation_invariant():
    rng = np.random.default_rng(3)
    x = rng.pareto(2.0, 400)
    curve = scedasis_estimate(x, ScedasisConfig(k=40, h=0.1, kappa=0.5))
    assert np.all(curve.values >= 0.5)
    keep = curve.raw >= 0.5
    assert np.array_equal(curve.values[keep], curve.raw[keep])


def test_curve_at_matches_grid():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(500)
    curve = scedasis_estimate(x, ScedasisConfig(k=50))
    assert np.allclose(curve.at(curve.grid), curve.values, atol=1e-14)


def test_config_validation():
    with pytest.raises(ConfigError):
        ScedasisConfig(k=10, h=0.5)
    with pytest.raises(ConfigError):
        ScedasisConfig(k=10, kappa=-1)
    with pytest.raises(ConfigError):
        ScedasisConfig(k=10, grid=np.array([0.5, 0.2]))
    with pytest.raises(ConfigError):
        ScedasisConfig(k=10, grid=np.array([]))
    with pytest.raises(ConfigError):
        scedasis_estimate(np.arange(10.0), ScedasisConfig(k=5, h=0.2), BoundaryKernel(h=0.1))


def test_default_grid():
    g = default_grid()
    assert g.size == 514 and g[0] == 0 and g[-1] == 1


def test_ties_flagged():
    x = [1.0, 3.0, 3.0, 3.0, 2.0]
    curve = scedasis_estimate(x, ScedasisConfig(k=2, h=0.2))
    assert curve.exceedance_count_mismatch and curve.to_dict()["n_exceed"] == 0


def test_homoscedastic_average_near_one():
    grid = np.linspace(0.2, 0.8, 61)
    means = []
    for seed in range(50):
        sim = simulate_armax(2000, 0.0, ScedasisFamily("c1", 1.0), rng_stream(11, seed))
        curve = scedasis_estimate(sim.x, ScedasisConfig(k=200, h=0.2, kappa=0.0, grid=grid))
        means.append(curve.raw.mean())
    assert abs(np.mean(means) - 1.0) < 0.15


def test_boundary_estimate_can_be_negative_truncated_is_not():
    # exceedances only at t = 0.15 give x = -0.75 at s = 0, where the corrected weight is negative
    x = np.zeros(1000)
    x[149] = 5.0
    x[0] = -1.0
    cfg = ScedasisConfig(k=1, h=0.2, kappa=0.1, grid=np.array([0.0, 0.5]))
    curve = scedasis_estimate(x, cfg)
    assert curve.raw[0] < 0
    assert curve.values[0] == 0.1
