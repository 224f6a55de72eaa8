"""Empirical data path: capitalization CSVs to weight paths and the
cumulative excess growth curve.

Input format: header ``t,S1,...,Sd``, one row per grid time, uniform
spacing, strictly positive capitalizations.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveCap, NonuniformGrid, ParseError
from .quadvar import GammaPath, gamma_H_weighted, slope_monotone_check
from .simplex import CapPath, TimeGrid, weights_from_caps

GRID_REL_TOL = 1e-6


def read_caps(path) -> CapPath:
    """Parse and validate a capitalization CSV into a CapPath."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(0, "empty file") from None
        if not header or header[0].strip() != "t":
            raise ParseError(0, "header must start with column 't'")
        d = len(header) - 1
        if d < 2:
            raise ParseError(0, "need at least two asset columns")
        for j, name in enumerate(header[1:], start=1):
            if name.strip() != f"S{j}":
                raise ParseError(0, f"expected column S{j}, got {name!r}")
        times, rows = [], []
        for rownum, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d + 1:
                raise ParseError(rownum,
                                 f"expected {d + 1} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as e:
                raise ParseError(rownum, str(e)) from None
            for j, v in enumerate(vals[1:], start=1):
                if not (v > 0) or not math.isfinite(v):
                    raise NonpositiveCap(rownum, j)
            times.append(vals[0])
            rows.append(vals[1:])
    if len(rows) < 2:
        raise ParseError(len(rows), "need at least two data rows")
    t = np.array(times)
    dts = np.diff(t)
    if dts.min() <= 0:
        bad = int(np.where(dts <= 0)[0][0]) + 2
        raise NonuniformGrid(bad)
    dt = float(dts[0])
    off = np.abs(dts - dt) > GRID_REL_TOL * max(dt, 1.0)
    if off.any():
        raise NonuniformGrid(int(np.where(off)[0][0]) + 2)
    grid = TimeGrid(t0=float(t[0]), dt=dt, n_steps=len(rows) - 1)
    return CapPath(grid=grid, caps=np.array(rows)).validate()


@dataclass(frozen=True)
class GammaHSummary:
    total: float
    eta_hat: float
    slope_check: bool


def empirical_gamma_H(caps: CapPath):
    """Cumulative excess growth of the market from capitalizations.

    Returns (GammaPath, GammaHSummary): the curve, its total, the mean
    slope eta_hat = total / (T - t0), and whether the per-step slope
    stays above 0.9 * eta_hat.
    """
    weights = weights_from_caps(caps)
    g = gamma_H_weighted(weights)
    span = caps.grid.horizon
    total = float(g.values[-1])
    eta_hat = total / span if span > 0 else 0.0
    check = slope_monotone_check(g, 0.9 * eta_hat)
    return g, GammaHSummary(total=total, eta_hat=eta_hat,
                            slope_check=check.holds)


def gamma_H_to_csv(g: GammaPath, path):
    data = np.column_stack([g.grid.times(), g.values])
    np.savetxt(path, data, delimiter=",", header="t,gammaH", comments="",
               fmt="%.17g")


def summary_json(s: GammaHSummary) -> str:
    return json.dumps({"total": s.total, "eta_hat": s.eta_hat,
                       "slope_check": s.slope_check}, sort_keys=True,
                      indent=2)
