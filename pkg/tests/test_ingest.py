import json
import math

import numpy as np
import pytest

from sptlab import errors
from sptlab import ingest as ig
from sptlab import models as md
from sptlab import quadvar as qv
from sptlab.simplex import CapPath, TimeGrid, caps_to_csv

LOG2 = math.log(2.0)


def write(tmp_path, text, name="caps.csv"):
    f = tmp_path / name
    f.write_text(text)
    return f


GOOD = """t,S1,S2,S3
0,3,2,1
0.5,2,2,2
1,1,2,3
"""


def test_read_caps_good(tmp_path):
    caps = ig.read_caps(write(tmp_path, GOOD))
    assert caps.grid.dt == 0.5
    assert caps.grid.n_steps == 2
    np.testing.assert_allclose(caps.caps[0], [3, 2, 1])


def test_read_caps_errors(tmp_path):
    with pytest.raises(errors.ParseError):
        ig.read_caps(write(tmp_path, ""))
    with pytest.raises(errors.ParseError):
        ig.read_caps(write(tmp_path, "time,S1,S2\n0,1,1\n1,1,1\n"))
    with pytest.raises(errors.ParseError):
        ig.read_caps(write(tmp_path, "t,S1,X2\n0,1,1\n1,1,1\n"))
    with pytest.raises(errors.ParseError):
        ig.read_caps(write(tmp_path, "t,S1,S2\n0,1\n1,1,1\n"))
    with pytest.raises(errors.ParseError):
        ig.read_caps(write(tmp_path, "t,S1,S2\n0,one,1\n1,1,1\n"))
    with pytest.raises(errors.ParseError):
        ig.read_caps(write(tmp_path, "t,S1,S2\n0,1,1\n"))
    with pytest.raises(errors.NonpositiveCap) as e:
        ig.read_caps(write(tmp_path, "t,S1,S2\n0,1,1\n1,-2,1\n"))
    assert (e.value.row, e.value.col) == (2, 1)
    with pytest.raises(errors.NonuniformGrid):
        ig.read_caps(write(tmp_path, "t,S1,S2\n0,1,1\n1,1,1\n1.5,1,1\n"))
    with pytest.raises(errors.NonuniformGrid):
        ig.read_caps(write(tmp_path, "t,S1,S2\n0,1,1\n0,1,1\n"))


def test_read_caps_monthly_grid(tmp_path):
    rows = "\n".join(f"{k / 12.0:.17g},1,2" for k in range(13))
    caps = ig.read_caps(write(tmp_path, "t,S1,S2\n" + rows + "\n"))
    assert caps.grid.dt == pytest.approx(1.0 / 12.0, rel=1e-9)
    assert caps.grid.n_steps == 12


def test_alternating_caps_gamma_value(tmp_path):
    # weights flip between (2/3, 1/3) and (1/3, 2/3): each step adds
    # 1/2 (mu1 + mu2) log(2)^2 = log(2)^2 / 2
    text = "t,S1,S2\n" + "\n".join(
        f"{k},{2 - (k % 2)},{1 + (k % 2)}" for k in range(5)) + "\n"
    caps = ig.read_caps(write(tmp_path, text))
    g, summary = ig.empirical_gamma_H(caps)
    per_step = 0.5 * LOG2 ** 2
    np.testing.assert_allclose(g.increments(), per_step, atol=1e-15)
    assert summary.total == pytest.approx(4 * per_step)
    assert summary.eta_hat == pytest.approx(per_step)
    assert summary.slope_check is True


def test_roundtrip_with_simulated_caps(tmp_path):
    # fabricate caps whose weights follow a simulated model, write them
    # with full precision, and recover the same excess growth curve
    spec = md.model_stationary_circle(0.1)
    cfg = md.SimConfig(dt=1e-2, T=1.0, n_paths=1, seed=31)
    ens = md.simulate_em(spec, cfg)
    path = ens.path(0)
    caps = CapPath(grid=path.grid, caps=path.points * 100.0)
    f = tmp_path / "sim.csv"
    caps_to_csv(caps, f)
    back = ig.read_caps(f)
    np.testing.assert_allclose(back.caps, caps.caps, rtol=1e-15)
    g1, _ = ig.empirical_gamma_H(caps)
    g2, _ = ig.empirical_gamma_H(back)
    np.testing.assert_allclose(g1.values, g2.values, atol=1e-14)
    # estimator consistency: weighted log form vs Hessian form
    from sptlab.genfn import entropy
    gH = qv.gamma_G(entropy(), path, qv.realized_cov(path))
    assert g1.values[-1] == pytest.approx(gH.values[-1], rel=2e-2)


def test_outputs(tmp_path):
    caps = ig.read_caps(write(tmp_path, GOOD))
    g, summary = ig.empirical_gamma_H(caps)
    f = tmp_path / "g.csv"
    ig.gamma_H_to_csv(g, f)
    assert f.read_text().splitlines()[0] == "t,gammaH"
    blob = json.loads(ig.summary_json(summary))
    assert set(blob) == {"total", "eta_hat", "slope_check"}
