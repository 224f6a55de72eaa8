"""Trading strategies over weight paths.

Self-financing wealth (the independent oracle), additive and
multiplicative generation from a generating function, the explicit
power-function strategy, concatenation, and the two constructive
arbitrage strategies (single-asset variation and volatility switching).
All wealth is measured in units of total market capitalization.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GeneratorNearZero, GridMismatch, Mu1NearZero
from .genfn import GeneratingFunction, power, shift_scale
from .quadvar import (CovariationPath, GammaPath, gamma_G, realized_cov,
                      slope_monotone_check)
from .simplex import TimeGrid, WeightPath


@dataclass(frozen=True)
class Strategy:
    """Share holdings theta(t_k) on a grid."""

    grid: TimeGrid
    holdings: np.ndarray               # (n_steps+1, d)
    label: str = ""

    @property
    def d(self):
        return self.holdings.shape[1]

    def min_holding(self):
        return float(self.holdings.min())

    def is_long_only(self, tol=1e-12):
        return self.min_holding() >= -tol


@dataclass(frozen=True)
class WealthPath:
    grid: TimeGrid
    values: np.ndarray                 # (n_steps+1,)

    def terminal(self):
        return float(self.values[-1])


def market_strategy(grid: TimeGrid, d: int) -> Strategy:
    """Hold one share of everything; wealth is identically one."""
    return Strategy(grid=grid, holdings=np.ones((grid.n_times, d)),
                    label="market")


def wealth_selffinancing(s: Strategy, path: WeightPath) -> WealthPath:
    """Left-point self-financing wealth sum.

    V(t_{k+1}) = V(t_k) + theta(t_k) . (mu(t_{k+1}) - mu(t_k)), with
    V(t_0) = theta(t_0) . mu(t_0).  This is the independent oracle the
    closed-form wealth formulas are tested against.
    """
    if s.grid != path.grid:
        raise GridMismatch("strategy and path grids differ")
    P = path.points
    gains = np.einsum("kd,kd->k", s.holdings[:-1], np.diff(P, axis=0))
    V = np.empty(path.grid.n_times)
    V[0] = float(s.holdings[0] @ P[0])
    V[1:] = V[0] + np.cumsum(gains)
    return WealthPath(grid=path.grid, values=V)


def _interior_count(path: WeightPath):
    """Number of leading grid indices with guaranteed-interior points."""
    n = path.grid.n_steps
    return n + 1 if path.stop_index is None else path.stop_index


def _freeze_tail(arr, ku):
    if ku < arr.shape[0]:
        arr[ku:] = arr[ku - 1]
    return arr


def additive_generate(G: GeneratingFunction, path: WeightPath,
                      cov: CovariationPath):
    """Additively generated strategy and its master-formula wealth.

    phi_i(t_k) = D_iG(mu) + Gamma^G(t_k) + G(mu) - sum_j mu_j D_jG(mu);
    wealth G(mu(t_k)) + Gamma^G(t_k), free of stochastic integrals.
    """
    g = gamma_G(G, path, cov)
    P = path.points
    ku = _interior_count(path)
    grads = G.grad_many(P[:ku])
    vals = G.value_many(np.maximum(P, 0.0))
    phi = np.empty_like(P)
    phi[:ku] = (grads + (g.values[:ku] + vals[:ku]
                         - np.einsum("kd,kd->k", P[:ku], grads))[:, None])
    _freeze_tail(phi, ku)
    V = vals + g.values
    strat = Strategy(grid=path.grid, holdings=phi,
                     label=f"additive[{G.label}]")
    return strat, WealthPath(grid=path.grid, values=V)


def multiplicative_generate(G: GeneratingFunction, path: WeightPath,
                            cov: CovariationPath, floor=1e-8):
    """Multiplicatively generated strategy and its wealth Z^G.

    Z(t_k) = G(mu(t_k)) exp(sum_{j<k} dGamma^G(t_j)/G(mu(t_j)));
    psi_i = Z (1 + (D_iG - sum_j mu_j D_jG)/G).
    """
    g = gamma_G(G, path, cov)
    P = path.points
    ku = _interior_count(path)
    vals = G.value_many(np.maximum(P, 0.0))
    if np.abs(vals[:ku]).min() < floor:
        raise GeneratorNearZero(
            f"|G| fell below {floor} along the path")
    expo = np.zeros(path.grid.n_times)
    expo[1:] = np.cumsum(g.increments() / np.where(vals[:-1] == 0, 1.0,
                                                   vals[:-1]))
    Z = vals * np.exp(expo)
    grads = G.grad_many(P[:ku])
    tilt = (grads - np.einsum("kd,kd->k", P[:ku], grads)[:, None]) \
        / vals[:ku, None]
    psi = np.empty_like(P)
    psi[:ku] = Z[:ku, None] * (1.0 + tilt)
    _freeze_tail(psi, ku)
    strat = Strategy(grid=path.grid, holdings=psi,
                     label=f"multiplicative[{G.label}]")
    return strat, WealthPath(grid=path.grid, values=Z)


def power_psi(q: float, path: WeightPath,
              cov: Optional[CovariationPath] = None, floor=1e-8):
    """Explicit strategy for the power function x_1^q.

    Z(t_k) = mu_1(t_k)^q exp(-q(q-1)/2 sum_{j<k} mu_1(t_j)^{-2}
    d<mu_1>(t_j)); psi_1 = (q/mu_1 + 1 - q) Z, psi_i = (1 - q) Z.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if cov is None:
        cov = realized_cov(path)
    P = path.points
    n = path.grid.n_steps
    stop = path.stop_index if path.stop_index is not None else n
    mu1 = P[:, 0]
    if mu1[:stop + 1].min() < floor:
        raise Mu1NearZero(f"mu_1 fell below {floor} along the path")
    inc = cov.increments[:, 0, 0].copy()
    if stop < n:
        inc[stop:] = 0.0
    expo = np.zeros(n + 1)
    expo[1:] = np.cumsum(-0.5 * q * (q - 1.0) * inc / (mu1[:-1] ** 2))
    Z = mu1 ** q * np.exp(expo)
    psi = np.full_like(P, 1.0 - q) * Z[:, None]
    psi[:, 0] = (q / mu1 + 1.0 - q) * Z
    strat = Strategy(grid=path.grid, holdings=psi, label=f"power[q={q:g}]")
    return strat, WealthPath(grid=path.grid, values=Z)


def concat(b: float, tau_index: Optional[int], phi: Strategy,
           phi_wealth: WealthPath):
    """Hold b of everything until tau, then switch to phi funded at its
    wealth level there.

    psi(t_k) = b before tau and b + phi(t_k) - V^phi(tau) from tau on;
    wealth b + (V^phi(t_k) - V^phi(tau)) 1{k >= tau}.
    """
    grid = phi.grid
    holdings = np.full_like(phi.holdings, b)
    V = np.full(grid.n_times, float(b))
    if tau_index is not None:
        Vtau = phi_wealth.values[tau_index]
        holdings[tau_index:] = b + phi.holdings[tau_index:] - Vtau
        V[tau_index:] = b + phi_wealth.values[tau_index:] - Vtau
    strat = Strategy(grid=grid, holdings=holdings,
                     label=f"concat[b={b:g},tau={tau_index}]->{phi.label}")
    return strat, WealthPath(grid=grid, values=V)


def one_asset_q(mu1_0: float, eta: float, T: float) -> float:
    """Power exponent for the single-asset arbitrage: smallest q > 1 with
    exp(-(eta/2)(q-1)T) < mu1(0), plus a fixed margin of 0.5."""
    return 1.0 + (2.0 / (eta * T)) * math.log(1.0 / mu1_0) + 0.5


def one_asset_arbitrage(T: float, eta: float, path: WeightPath,
                        cov: Optional[CovariationPath] = None):
    """Long-only strategy beating the market when asset 1 either loses
    half its weight or accumulates covariation at least eta T.

    Works on nu = mu stopped when mu_1 first drops to mu_1(0)/2; holds
    phi_i = 1 + nu_1(0)^q - psi^F_i against the power strategy psi^F.
    Returns (strategy, wealth, q, profit path), the last being the exact
    excess V - 1 = nu_1(0)^q - Z^F computed without cancellation.
    """
    from .models import boundary_stop
    mu1_0 = float(path.points[0, 0])
    q = one_asset_q(mu1_0, eta, T)
    nu, rec = boundary_stop(path, "mu1_half")
    if cov is not None and rec.stop_index is not None:
        inc = cov.increments.copy()
        inc[rec.stop_index:] = 0.0
        cov = CovariationPath(grid=cov.grid, increments=inc,
                              source=cov.source)
    elif cov is None:
        cov = realized_cov(nu)
    psi, Z = power_psi(q, nu, cov)
    base = mu1_0 ** q
    holdings = 1.0 + base - psi.holdings
    profit = base - Z.values
    strat = Strategy(grid=path.grid, holdings=holdings,
                     label=f"one_asset[q={q:.6g}]")
    wealth = WealthPath(grid=path.grid, values=1.0 + profit)
    return strat, wealth, q, profit


def switching_arbitrage(G: GeneratingFunction, h: float, eta: float,
                        T: float, path: WeightPath, cov: CovariationPath):
    """Hold the market until G(mu) first dips below h + eta T / 3 within
    [0, T/2], then switch to the additive strategy of the rescaled
    function (G - h) 3/(eta T).

    The resulting wealth dominates 1{t < tau} + 3 (t - tau)/T 1{t >= tau}
    up to discretization error.  Returns (strategy, wealth, tau_index).
    """
    gpath = gamma_G(G, path, cov)
    verdict = slope_monotone_check(gpath, eta, window=(0.0, T))
    if not verdict.holds:
        warnings.warn("cumulative volatility slope below eta on [0, T]; "
                      "the switching bound is not guaranteed", stacklevel=2)
    Gstar = shift_scale(G, h, eta, T)
    vals = G.value_many(np.maximum(path.points, 0.0))
    times = path.grid.times()
    trigger = np.where((vals < h + eta * T / 3.0)
                       & (times <= T / 2.0 + 1e-12))[0]
    tau = int(trigger[0]) if trigger.size else None
    phi, Vphi = additive_generate(Gstar, path, cov)
    strat, wealth = concat(1.0, tau, phi, Vphi)
    return strat, wealth, tau


def strategy_to_csv(s: Strategy, w: WealthPath, path):
    d = s.d
    header = "t," + ",".join(f"theta{i + 1}" for i in range(d)) + ",V"
    data = np.column_stack([s.grid.times(), s.holdings, w.values])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")
