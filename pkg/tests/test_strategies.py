import math
import warnings

import numpy as np
import pytest

from sptlab import errors
from sptlab import genfn as gf
from sptlab import models as md
from sptlab import quadvar as qv
from sptlab import strategies as stg
from sptlab.simplex import TimeGrid, WeightPath, constant_path

LOG2 = math.log(2.0)
LOG4 = math.log(4.0)


def random_walk_path(n=400, seed=2, scale=2e-3, x0=(0.4, 0.35, 0.25)):
    rng = np.random.default_rng(seed)
    pts = np.empty((n + 1, 3))
    pts[0] = x0
    for k in range(n):
        step = rng.normal(0, scale, 3)
        step -= step.mean()
        pts[k + 1] = pts[k] + step
    assert pts.min() > 0.05
    return WeightPath(grid=TimeGrid(0.0, 1e-3, n), points=pts)


def test_market_wealth_identically_one():
    path = random_walk_path()
    s = stg.market_strategy(path.grid, 3)
    V = stg.wealth_selffinancing(s, path)
    np.testing.assert_allclose(V.values, 1.0, atol=1e-14)
    assert s.is_long_only()


def test_selffinancing_buy_and_hold():
    path = random_walk_path(n=50)
    hold = np.tile([2.0, 0.0, 0.0], (51, 1))
    s = stg.Strategy(grid=path.grid, holdings=hold)
    V = stg.wealth_selffinancing(s, path)
    np.testing.assert_allclose(V.values, 2.0 * path.points[:, 0], atol=1e-14)


def test_selffinancing_grid_mismatch():
    path = random_walk_path(n=10)
    s = stg.market_strategy(TimeGrid(0.0, 1e-3, 11), 3)
    with pytest.raises(errors.GridMismatch):
        stg.wealth_selffinancing(s, path)


def test_additive_quadratic_hand_example():
    grid = TimeGrid(0.0, 1.0, 1)
    path = constant_path(grid, [0.5, 0.25, 0.25])
    cov = qv.realized_cov(path)
    s, V = stg.additive_generate(gf.quadratic(), path, cov)
    # phi_i = -2x_i + 0 + G + 2 sum x_j^2 = -2x_i + 1 + sum x_j^2
    np.testing.assert_allclose(s.holdings[0], [0.375, 0.875, 0.875],
                               atol=1e-15)
    assert V.values[0] == pytest.approx(0.625, abs=1e-15)
    oracle = stg.wealth_selffinancing(s, path)
    np.testing.assert_allclose(V.values, oracle.values, atol=1e-15)


def test_additive_entropy_hand_example():
    grid = TimeGrid(0.0, 1.0, 1)
    path = constant_path(grid, [0.5, 0.25, 0.25])
    s, V = stg.additive_generate(gf.entropy(), path, qv.realized_cov(path))
    # phi_i = D_iH + H - (H - 1) = -log x_i
    np.testing.assert_allclose(s.holdings[0], [LOG2, LOG4, LOG4], atol=1e-14)
    assert V.values[0] == pytest.approx(1.5 * LOG2, abs=1e-14)


@pytest.mark.parametrize("make", [gf.entropy, gf.quadratic, gf.geom_mean])
def test_generated_wealth_matches_selffinancing_oracle(make):
    G = make()
    path = random_walk_path()
    cov = qv.realized_cov(path)
    for gen in (stg.additive_generate, stg.multiplicative_generate):
        s, V = gen(G, path, cov)
        oracle = stg.wealth_selffinancing(s, path)
        # scaled to wealth level V(0); discretization error O(dt)
        dev = np.abs(V.values - oracle.values).max() / V.values[0]
        assert dev < 2e-4
        assert s.is_long_only()


def test_additive_quadratic_wealth_is_exact_at_any_step_size():
    # second order terms of Q are exactly the trace, so the master
    # formula telescopes with no error even for coarse steps
    path = random_walk_path(n=30, scale=8e-3)
    s, V = stg.additive_generate(gf.quadratic(), path,
                                 qv.realized_cov(path))
    oracle = stg.wealth_selffinancing(s, path)
    np.testing.assert_allclose(V.values, oracle.values, atol=1e-14)


def test_multiplicative_near_zero_generator_raises():
    grid = TimeGrid(0.0, 1.0, 1)
    path = constant_path(grid, [1.0 - 2e-13, 1e-13, 1e-13])
    with pytest.raises(errors.GeneratorNearZero):
        stg.multiplicative_generate(gf.geom_mean(), path,
                                    qv.realized_cov(path))


def test_power_psi_q1_is_single_asset_buy_and_hold():
    path = random_walk_path(n=50)
    s, Z = stg.power_psi(1.0, path)
    np.testing.assert_allclose(Z.values, path.points[:, 0], atol=1e-15)
    np.testing.assert_allclose(s.holdings[:, 0], 1.0, atol=1e-15)
    np.testing.assert_allclose(s.holdings[:, 1:], 0.0, atol=1e-15)


def test_power_psi_constant_path_q2():
    grid = TimeGrid(0.0, 1.0, 2)
    path = constant_path(grid, [0.4, 0.35, 0.25])
    s, Z = stg.power_psi(2.0, path)
    np.testing.assert_allclose(Z.values, 0.16, atol=1e-15)
    np.testing.assert_allclose(s.holdings[:, 0], (2 / 0.4 - 1) * 0.16,
                               atol=1e-15)
    np.testing.assert_allclose(s.holdings[:, 1], -0.16, atol=1e-15)


def test_power_psi_matches_multiplicative_generation():
    path = random_walk_path()
    cov = qv.realized_cov(path)
    q = 3.0
    s1, Z1 = stg.power_psi(q, path, cov)
    s2, Z2 = stg.multiplicative_generate(gf.power(q), path, cov)
    np.testing.assert_allclose(Z1.values, Z2.values, rtol=1e-12)
    np.testing.assert_allclose(s1.holdings, s2.holdings, rtol=1e-10,
                               atol=1e-14)


def test_power_psi_oracle_agreement():
    path = random_walk_path()
    s, Z = stg.power_psi(4.0, path)
    oracle = stg.wealth_selffinancing(s, path)
    assert np.abs(Z.values - oracle.values).max() / Z.values[0] < 2e-3


def test_power_psi_mu1_floor():
    grid = TimeGrid(0.0, 1.0, 1)
    path = constant_path(grid, [1e-9, 0.5, 0.5 - 1e-9])
    with pytest.raises(errors.Mu1NearZero):
        stg.power_psi(2.0, path)


def test_concat_before_and_after():
    path = random_walk_path(n=20)
    phi = stg.market_strategy(path.grid, 3)
    Vphi = stg.wealth_selffinancing(phi, path)
    s, V = stg.concat(1.0, None, phi, Vphi)
    np.testing.assert_allclose(V.values, 1.0, atol=1e-15)
    np.testing.assert_allclose(s.holdings, 1.0, atol=1e-15)
    s2, V2 = stg.concat(2.0, 5, phi, Vphi)
    np.testing.assert_allclose(V2.values[:5], 2.0)
    # switching into the market keeps wealth flat at b
    np.testing.assert_allclose(V2.values[5:], 2.0, atol=1e-14)
    oracle = stg.wealth_selffinancing(s2, path)
    np.testing.assert_allclose(oracle.values[5:] - oracle.values[5],
                               V2.values[5:] - V2.values[5], atol=1e-14)


def test_concat_oracle_agreement_nontrivial_tail():
    path = random_walk_path()
    cov = qv.realized_cov(path)
    phi, Vphi = stg.additive_generate(gf.quadratic(), path, cov)
    s, V = stg.concat(1.0, 100, phi, Vphi)
    oracle = stg.wealth_selffinancing(s, path)
    np.testing.assert_allclose(V.values, oracle.values, atol=1e-13)


def test_one_asset_q_formula():
    assert stg.one_asset_q(0.5, 1.0, 1.0) \
        == pytest.approx(1.5 + 2.0 * LOG2, abs=1e-14)
    assert stg.one_asset_q(0.5, 1.0, 1.0) == pytest.approx(2.8862943611,
                                                           abs=1e-9)
    # the defining inequality holds with margin
    q = stg.one_asset_q(0.3, 0.5, 2.0)
    assert math.exp(-0.25 * (q - 1.0) * 2.0) < 0.3


def test_one_asset_arbitrage_on_reflected_model():
    spec = md.model_reflected_two_asset(0.5, 0.3)
    cfg = md.SimConfig(dt=1e-3, T=1.0, n_paths=3, seed=42)
    ens = md.simulate_em(spec, cfg)
    eta = 0.09   # kappa^2
    for i in range(3):
        path = ens.path(i)
        cov = qv.analytic_cov(path, spec.cov_rate)
        s, V, q, profit = stg.one_asset_arbitrage(1.0, eta, path, cov)
        assert s.is_long_only()
        assert V.values[0] == pytest.approx(1.0, abs=1e-14)
        assert V.terminal() > 1.0
        np.testing.assert_allclose(V.values, 1.0 + profit, atol=1e-15)
        oracle = stg.wealth_selffinancing(s, path)
        assert abs(oracle.values[0] - 1.0) < 1e-14


def test_switching_arbitrage_immediate_trigger_exact_growth():
    # stationary circle with h just below Q(mu0) triggers at t = 0 and the
    # analytic-cov wealth is exactly the linear ramp 1 + 3 t / T
    delta = 0.1
    spec = md.model_stationary_circle(delta)
    eta = 1.5 * delta * delta
    q0 = 2.0 / 3.0 - eta
    T = 0.3
    cfg = md.SimConfig(dt=1e-3, T=T, n_paths=2, seed=11)
    ens = md.simulate_em(spec, cfg)
    for i in range(2):
        path = ens.path(i)
        cov = qv.analytic_cov(path, spec.cov_rate)
        s, V, tau = stg.switching_arbitrage(gf.quadratic(), q0 - 1e-3, eta,
                                            T, path, cov)
        assert tau == 0
        t = path.grid.times()
        np.testing.assert_allclose(V.values, 1.0 + 3.0 * t / T, atol=1e-12)


def test_switching_arbitrage_no_trigger_stays_market():
    delta = 0.1
    spec = md.model_stationary_circle(delta)
    eta = 1.5 * delta * delta
    T = 0.3
    cfg = md.SimConfig(dt=1e-3, T=T, n_paths=1, seed=11)
    ens = md.simulate_em(spec, cfg)
    path = ens.path(0)
    cov = qv.analytic_cov(path, spec.cov_rate)
    # h far below inf G: the dip level is never reached
    s, V, tau = stg.switching_arbitrage(gf.quadratic(), 0.0, eta, T,
                                        path, cov)
    assert tau is None
    np.testing.assert_allclose(V.values, 1.0, atol=1e-15)


def test_switching_arbitrage_warns_on_slope_failure():
    path = constant_path(TimeGrid(0.0, 0.01, 10), [0.4, 0.35, 0.25])
    cov = qv.realized_cov(path)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        stg.switching_arbitrage(gf.quadratic(), 0.0, 1.0, 0.1, path, cov)
    assert any("slope" in str(x.message) for x in w)


def test_strategy_csv(tmp_path):
    path = random_walk_path(n=10)
    s = stg.market_strategy(path.grid, 3)
    V = stg.wealth_selffinancing(s, path)
    f = tmp_path / "s.csv"
    stg.strategy_to_csv(s, V, f)
    lines = f.read_text().splitlines()
    assert lines[0] == "t,theta1,theta2,theta3,V"
    assert len(lines) == 12
