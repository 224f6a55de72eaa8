import math

import numpy as np
import pytest

from sptlab import errors
from sptlab import genfn as gf
from sptlab import models as md
from sptlab.simplex import TimeGrid, WeightPath, radial_r, radial_r_many


def test_circle_start_and_amp_phase_roundtrip():
    x = md.circle_start(0.1, 0.0)
    np.testing.assert_allclose(x, [1 / 3 + 0.1, 1 / 3 - 0.05, 1 / 3 - 0.05],
                               atol=1e-15)
    amp, theta = md._amp_phase(x[None, :])
    assert amp[0] == pytest.approx(0.1, abs=1e-15)
    assert theta[0] == pytest.approx(0.0, abs=1e-15)
    y = md.circle_start(0.07, 0.3)
    amp, theta = md._amp_phase(y[None, :])
    assert amp[0] == pytest.approx(0.07, abs=1e-14)
    assert theta[0] == pytest.approx(2 * math.pi * 0.3, abs=1e-13)


def test_expanding_circle_horizon_and_structure():
    spec = md.model_expanding_circle(md.circle_start(0.1))
    r0 = 1.5 * 0.01
    assert spec.params["r0"] == pytest.approx(r0, abs=1e-15)
    assert spec.default_horizon == pytest.approx(math.log(1 / (6 * r0)))
    # diffusion columns sum to zero, drift vanishes
    X = np.array([[0.5, 0.3, 0.2]])
    assert abs(spec.diffusion(0.0, X).sum()) < 1e-15
    assert abs(spec.drift(0.0, X).sum()) < 1e-15


def test_expanding_circle_frozen_driver_closed_form():
    spec = md.model_expanding_circle(md.circle_start(0.1))
    times = np.linspace(0.0, 1.0, 11)
    W = np.zeros((11, 1))
    o = spec.oracle(times, W)
    expect = 1 / 3 + 0.1 * np.exp(0.5 * times[:, None]) \
        * np.cos(md.PHASES[None, :])
    np.testing.assert_allclose(o, expect, atol=1e-15)
    np.testing.assert_allclose(radial_r_many(o),
                               1.5e-2 * np.exp(times), rtol=1e-13)


def test_expanding_circle_em_matches_oracle_strong():
    spec = md.model_expanding_circle(md.circle_start(0.1))
    cfg = md.SimConfig(dt=1e-3, T=1.0, n_paths=8, seed=123)
    ens = md.simulate_em(spec, cfg)
    errs = []
    for i in range(8):
        o = spec.oracle(ens.grid.times(), ens.driver_path(i))
        errs.append(np.abs(ens.points[i] - o).max())
    assert max(errs) < 5e-2
    assert np.mean(errs) < 2e-2


def test_em_strong_convergence_rate_on_shared_noise():
    spec = md.model_expanding_circle(md.circle_start(0.1))
    seeds = np.arange(16)
    dt_fine = 2.5e-4
    cfg = md.SimConfig(dt=dt_fine, T=0.5, n_paths=16, seed=77)
    dW = md.brownian_increments(77, seeds, cfg.n_steps, 1, dt_fine)
    errs = []
    for fac in (4, 2, 1):
        dt = dt_fine * fac
        c = md.SimConfig(dt=dt, T=0.5, n_paths=16, seed=77)
        inc = md.coarsen_increments(dW, fac)
        ens = md.simulate_em(spec, c, path_ids=seeds, increments=inc)
        e = 0.0
        for i in range(16):
            o = spec.oracle(ens.grid.times(), ens.driver_path(i))
            e += np.abs(ens.points[i] - o).max()
        errs.append(e / 16)
    # strong order 1/2: error ratio ~ sqrt(2) per halving
    assert errs[0] / errs[1] > 1.2
    assert errs[1] / errs[2] > 1.2


def test_slowed_radial_law_and_cap():
    w0 = np.array([0.5, 0.3, 0.2])
    spec = md.model_slowed(w0)
    r0 = radial_r(w0)
    cfg = md.SimConfig(dt=1e-4, T=0.05, n_paths=16, seed=5)
    ens = md.simulate_em(spec, cfg)
    t = ens.grid.times()
    r = radial_r_many(ens.points)
    # the scheme increments r by exactly dW^2 each step, so r tracks
    # r0 + t with variance 2 n dt^2
    np.testing.assert_allclose(np.diff(r, axis=1),
                               ens.increments[:, :, 0] ** 2, atol=1e-12)
    dev = np.abs(r - (r0 + t)[None, :]).max()
    assert dev < 3e-2
    bias = np.abs((r - (r0 + t)[None, :]).mean(axis=0)).max()
    assert bias < 5e-3
    with pytest.raises(errors.AtNode):
        md.model_slowed(np.array([1 / 3, 1 / 3, 1 / 3]))


def test_spiral_clamp_and_radius_law():
    spec = md.model_spiral(0.01)
    assert spec.default_horizon == pytest.approx(-2 * math.log(0.09))
    cfg = md.SimConfig(dt=1e-3, T=2.0, n_paths=8, seed=3)
    ens = md.simulate_em(spec, cfg)
    t = ens.grid.times()
    amp = np.sqrt(2.0 * radial_r_many(ens.points) / 3.0)
    phi = amp * np.exp(-0.5 * t)[None, :]
    # Phi = 2 delta + Psi stays in (delta, 3 delta)
    assert phi.min() >= 0.01 - 1e-12
    assert phi.max() <= 0.03 + 1e-12
    with pytest.raises(ValueError):
        md.model_spiral(0.2)


def test_spiral_cov_rate_consistency():
    # analytic rate from (t, x) agrees with realized over tiny steps
    spec = md.model_spiral(0.01)
    cfg = md.SimConfig(dt=1e-5, T=0.01, n_paths=4, seed=9)
    ens = md.simulate_em(spec, cfg)
    for i in range(4):
        P = ens.points[i]
        dP = np.diff(P, axis=0)
        realized = (dP[:, :, None] * dP[:, None, :]).sum(axis=0)
        rate = spec.cov_rate(ens.grid.times()[:-1], P[:-1])
        analytic = rate.sum(axis=0) * cfg.dt
        assert np.abs(realized - analytic).max() < 5e-7


def test_stationary_circle_exact_rotation():
    spec = md.model_stationary_circle(0.1)
    cfg = md.SimConfig(dt=1e-3, T=1.0, n_paths=4, seed=21)
    ens = md.simulate_em(spec, cfg)
    for i in range(4):
        W = ens.driver_path(i)
        o = spec.oracle(ens.grid.times(), W)
        np.testing.assert_allclose(ens.points[i], o, atol=1e-14)
    r = radial_r_many(ens.points)
    np.testing.assert_allclose(r, 1.5e-2, atol=1e-14)
    assert not spec.stops_at_boundary


def test_lyapunov_flow_unit_decay():
    G = gf.geom_mean()
    mu0 = np.array([0.5, 0.3, 0.2])
    spec = md.model_lyapunov_flow(G, mu0)
    g0 = G.value(mu0)
    assert spec.params["G0"] == pytest.approx(0.3107232505953859, abs=1e-13)
    cfg = md.SimConfig(dt=1e-4, T=0.2, n_paths=64, seed=4)
    ens = md.simulate_em(spec, cfg)
    t = ens.grid.times()
    vals = G.value_many(np.maximum(ens.points, 0.0).reshape(-1, 3))
    vals = vals.reshape(64, -1)
    # per path the decay is exact only in the limit; the scheme leaves
    # O(sqrt(dt)) noise but no systematic drift
    dev = np.abs(vals - (g0 - t)[None, :]).max()
    assert dev < 3e-2
    bias = np.abs((vals - (g0 - t)[None, :]).mean(axis=0)).max()
    assert bias < 3e-3


def test_lyapunov_flow_rejects_navel_start():
    with pytest.raises(errors.AtNavel):
        md.model_lyapunov_flow(gf.geom_mean(), [1 / 3, 1 / 3, 1 / 3])


def test_reflected_two_asset_band_and_quadratic_variation():
    spec = md.model_reflected_two_asset(0.5, 0.3)
    cfg = md.SimConfig(dt=1e-3, T=2.0, n_paths=8, seed=6)
    ens = md.simulate_em(spec, cfg)
    mu1 = ens.points[:, :, 0]
    assert mu1.min() >= 0.125 - 1e-15
    assert mu1.max() <= 0.875 + 1e-15
    np.testing.assert_allclose(ens.points.sum(axis=2), 1.0, atol=1e-15)
    # folding preserves |increment| except across reflections
    dmu = np.abs(np.diff(mu1, axis=1))
    dW = np.abs(0.3 * ens.increments[:, :, 0])
    assert (dmu <= dW + 1e-15).all()
    interior = (mu1[:, :-1] > 0.2) & (mu1[:, :-1] < 0.8)
    np.testing.assert_allclose(dmu[interior], dW[interior], atol=1e-15)


def test_boundary_stop_rules():
    grid = TimeGrid(0.0, 0.1, 4)
    pts = np.array([[0.5, 0.3, 0.2], [0.45, 0.3, 0.25], [0.3, 0.4, 0.3],
                    [0.2, 0.5, 0.3], [0.1, 0.6, 0.3]])
    path = WeightPath(grid=grid, points=pts)
    stopped, rec = md.boundary_stop(path, "mu1_half")
    assert rec.stop_index == 3
    # crossing 0.25 between 0.3 and 0.2: one half of the step
    assert rec.hit_time == pytest.approx(0.25)
    assert (stopped.points[3:] == stopped.points[3]).all()
    # the start already has min weight 0.2, so 1/4 triggers immediately
    _, rec2 = md.boundary_stop(path, "min_weight", n=4)
    assert rec2.stop_index == 0
    _, rec2b = md.boundary_stop(path, "min_weight", n=6)
    assert rec2b.stop_index == 4
    _, rec3 = md.boundary_stop(path, "exit")
    assert rec3.stop_index is None
    same, rec4 = md.boundary_stop(path, "horizon")
    assert same is path and rec4.stop_index is None
    with pytest.raises(ValueError):
        md.boundary_stop(path, "bogus")


def test_engine_stops_and_freezes_at_boundary():
    spec = md.model_expanding_circle(md.circle_start(0.16))
    cfg = md.SimConfig(dt=1e-3, T=3.0, n_paths=16, seed=8)
    ens = md.simulate_em(spec, cfg)
    stopped = ens.stop_index < cfg.n_steps
    assert stopped.any()
    for i in np.where(stopped)[0]:
        k = ens.stop_index[i]
        assert (ens.points[i, k:] == ens.points[i, k]).all()
        assert ens.hit_time[i] <= ens.grid.times()[k] + 1e-12
        path = ens.path(i)
        assert path.stop_index == k
    ens2 = md.simulate_em(spec, cfg, path_ids=ens.path_ids)
    np.testing.assert_array_equal(ens.points, ens2.points)


def test_reproducibility_independent_of_chunking():
    spec = md.model_slowed(np.array([0.5, 0.3, 0.2]))
    cfg = md.SimConfig(dt=1e-3, T=0.05, n_paths=10, seed=99)
    full = md.simulate_em(spec, cfg)
    parts = [md.simulate_em(spec, cfg, path_ids=np.arange(lo, lo + 5))
             for lo in (5, 0)]
    glued = np.vstack([parts[1].points, parts[0].points])
    np.testing.assert_array_equal(full.points, glued)


def test_path_rng_streams_differ():
    a = md.path_rng(1, 0).standard_normal(4)
    b = md.path_rng(1, 1).standard_normal(4)
    c = md.path_rng(2, 0).standard_normal(4)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)
    np.testing.assert_array_equal(a, md.path_rng(1, 0).standard_normal(4))


def test_parse_model_ids():
    for mid in ("expanding_circle:delta=0.1,u=0.0",
                "slowed:w0=[0.5,0.3,0.2]",
                "spiral:delta=0.01",
                "stationary_circle:delta=0.1",
                "lyapunov_flow:G=geom_mean,mu0=[0.5,0.3,0.2]",
                "reflected2:mu1_0=0.5,kappa=0.3"):
        spec = md.parse_model(mid)
        assert spec.name == mid.partition(":")[0]
    assert md.parse_model("expanding_circle:v0=[0.5,0.3,0.2]").params["r0"] \
        == pytest.approx(radial_r([0.5, 0.3, 0.2]))
    with pytest.raises(errors.UnknownModel):
        md.parse_model("nope:delta=1")
    with pytest.raises(ValueError):
        md.parse_model("slowed:delta=0.1")


def test_ensemble_csv(tmp_path):
    spec = md.model_stationary_circle(0.1)
    cfg = md.SimConfig(dt=0.1, T=0.3, n_paths=2, seed=1)
    ens = md.simulate_em(spec, cfg)
    f = tmp_path / "e.csv"
    md.ensemble_to_csv(ens, f)
    lines = f.read_text().splitlines()
    assert lines[0] == "t,path_id,mu1,mu2,mu3"
    assert len(lines) == 1 + 2 * 4


def test_kernels_match_engine_hit_statistics():
    from sptlab import kernels
    mu0 = [0.5, 0.3, 0.2]
    hits = kernels.geom_flow_hit_times(mu0, 1e-4, 0.45, 300, 12)
    assert np.isfinite(hits).all()
    # exit concentrates near G(mu0) = 0.31072 with O(sqrt(dt)) spread
    assert abs(np.mean(hits) - 0.31072) < 5e-3
    assert np.std(hits) < 3e-2
    spec = md.model_lyapunov_flow(gf.geom_mean(), np.array(mu0))
    cfg = md.SimConfig(dt=1e-4, T=0.45, n_paths=300, seed=12)
    ens = md.simulate_em(spec, cfg)
    eng = ens.hit_time[np.isfinite(ens.hit_time)]
    assert len(eng) == 300
    assert abs(np.mean(eng) - np.mean(hits)) < 3e-3

    w0 = [0.5, 0.3, 0.2]
    hs = kernels.slowed_hit_times(w0, 1e-4, 0.13, 2000, 12)
    hs = hs[np.isfinite(hs)]
    # continuous-time exits cannot happen before 1/6 - r0
    assert hs.size > 0
    assert hs.min() > 1.0 / 6.0 - radial_r(w0) - 0.05
