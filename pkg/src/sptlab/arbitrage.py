"""Monte-Carlo verification harness.

Relative-arbitrage verdicts over simulated ensembles, horizon-threshold
arithmetic, martingale-mean tests, and per-model exact-identity suites
aggregated into deterministic machine-readable reports.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import genfn as gf
from .models import Ensemble, ModelSpec, SimConfig, ensemble_chunks
from .quadvar import (alpha_decompose, analytic_cov, eigvals_sym3_many,
                      gamma_G, realized_cov)
from .simplex import radial_r, radial_r_many
from .strategies import wealth_selffinancing


@dataclass(frozen=True)
class ArbVerdict:
    """Sample-level classification of a strategy against the market.

    Monte Carlo can support but never prove an almost-sure statement, so
    verdicts carry the suffix "-consistent".
    """

    n_paths: int
    frac_at_least_one: float
    frac_above_one: float
    min_terminal: float
    max_terminal: float
    mean_terminal: float
    nonnegativity_violations: int
    tol: float

    @property
    def verdict(self):
        if self.frac_at_least_one == 1.0 and self.frac_above_one == 1.0:
            return "strong-arb-consistent"
        if self.frac_at_least_one == 1.0 and self.frac_above_one > 0.0:
            return "arb-consistent"
        return "inconsistent"


def arb_verdict(ensembles, make_strategy: Callable, T: float,
                tol: float) -> ArbVerdict:
    """Evaluate a strategy constructor path by path through the
    self-financing oracle and classify the terminal wealth sample.

    ``ensembles`` is an Ensemble or an iterable of them (chunked runs);
    ``make_strategy(path, ensemble, i)`` returns a Strategy.
    """
    if isinstance(ensembles, Ensemble):
        ensembles = [ensembles]
    terminals = []
    nonneg_bad = 0
    for ens in ensembles:
        k_T = ens.grid.index_of(min(T, ens.grid.horizon))
        for i in range(ens.n_paths):
            path = ens.path(i)
            strat = make_strategy(path, ens, i)
            V = wealth_selffinancing(strat, path).values
            terminals.append(V[k_T])
            if (V[:k_T + 1] < -tol).any():
                nonneg_bad += 1
    v = np.array(terminals)
    return ArbVerdict(
        n_paths=len(v),
        frac_at_least_one=float((v >= 1.0 - tol).mean()),
        frac_above_one=float((v > 1.0 + tol).mean()),
        min_terminal=float(v.min()),
        max_terminal=float(v.max()),
        mean_terminal=float(v.mean()),
        nonnegativity_violations=nonneg_bad,
        tol=tol,
    )


@dataclass(frozen=True)
class HorizonReport:
    g_label: str
    g_at_start: float
    eta: float
    threshold: float                   # horizons beyond this admit arbitrage
    tested: List[dict] = field(default_factory=list)


def horizon_threshold(G: gf.GeneratingFunction, mu0, eta: float,
                      horizons=(), verdicts=()) -> HorizonReport:
    """Threshold T = G(mu0)/eta past which the normalized additive
    strategy beats the market."""
    g0 = G.value(np.asarray(mu0, float))
    if g0 <= 0 or eta <= 0:
        raise ValueError("need G(mu0) > 0 and eta > 0")
    tested = [{"T": float(t), "verdict": v.verdict,
               "min_terminal": v.min_terminal}
              for t, v in zip(horizons, verdicts)]
    return HorizonReport(g_label=G.label, g_at_start=g0, eta=eta,
                         threshold=g0 / eta, tested=tested)


def martingale_mean_test(terminal_weights, mu0, z_max=3.0) -> dict:
    """Per-asset z-scores of terminal-weight sample means against the
    start; passes when every |z| is at most z_max."""
    W = np.asarray(terminal_weights, float)
    mu0 = np.asarray(mu0, float)
    n = W.shape[0]
    if n < 100:
        raise ValueError("need at least 100 paths")
    mean = W.mean(axis=0)
    se = W.std(axis=0, ddof=1) / math.sqrt(n)
    z = np.where(se > 0, (mean - mu0) / np.where(se > 0, se, 1.0), 0.0)
    return {
        "n_paths": n,
        "mean": mean.tolist(),
        "stderr": se.tolist(),
        "z": z.tolist(),
        "pass": bool(np.abs(z).max() <= z_max),
    }


def terminal_weights(spec: ModelSpec, cfg: SimConfig, chunk=500):
    """Terminal (stopped) weights, stop indices and hit times for an
    ensemble, computed chunk by chunk."""
    W, stops, hits = [], [], []
    for ens in ensemble_chunks(spec, cfg, chunk=chunk):
        W.append(ens.points[:, -1])
        stops.append(ens.stop_index)
        hits.append(ens.hit_time)
    return np.vstack(W), np.concatenate(stops), np.concatenate(hits)


# --- identity suites -----------------------------------------------------


def _check(name, max_dev, tol):
    return {"name": name, "max_dev": float(max_dev), "tol": float(tol),
            "pass": bool(max_dev <= tol)}


def _mean_abs_over_paths(errs):
    """Ensemble mean of per-path errors at fixed times, then max over
    times: isolates scheme bias from per-path Gaussian noise."""
    return float(np.abs(np.mean(errs, axis=0)).max())


def identity_suite(spec: ModelSpec, cfg: SimConfig, chunk=500) -> List[dict]:
    """Run the exact-identity checks applicable to a model and report
    max deviation and tolerance for each."""
    checks = []
    sum_dev = 0.0
    em_r_errs = []
    oracle_r_dev = 0.0
    circle_dev = 0.0
    slope_min = math.inf
    eig2_min = math.inf
    g_errs = []
    hit_lo_dev = 0.0
    hit_hi_dev = 0.0
    gamma_dev = 0.0
    stop_bound_bad = 0
    wealth_dev = 0.0
    fold_dev = 0.0
    alpha_eig_dev = 0.0

    name = spec.name
    p = spec.params
    times = None

    for ens in ensemble_chunks(spec, cfg, chunk=chunk):
        times = ens.grid.times()
        pts = ens.points
        sum_dev = max(sum_dev, float(np.abs(pts.sum(axis=2) - 1.0).max()))

        if name == "expanding_circle":
            r0 = p["r0"]
            law = r0 * np.exp(times)
            alive = ens.stop_index[:, None] >= np.arange(len(times))[None, :]
            r_em = radial_r_many(pts)
            em_r_errs.append(np.where(alive, r_em / law - 1.0, 0.0))
            for i in range(ens.n_paths):
                W = ens.driver_path(i)
                o = spec.oracle(times, W)
                n_ok = ens.stop_index[i] + 1
                r_o = radial_r_many(o[:n_ok])
                oracle_r_dev = max(oracle_r_dev, float(
                    np.abs(r_o / law[:n_ok] - 1.0).max()))
                circle_dev = max(circle_dev, float(np.abs(
                    (o[:n_ok] ** 2).sum(axis=1)
                    - (1.0 / 3.0 + law[:n_ok])).max()))
        elif name == "slowed":
            r0 = p["r0"]
            law = r0 + times
            alive = ens.stop_index[:, None] >= np.arange(len(times))[None, :]
            r_em = radial_r_many(pts)
            em_r_errs.append(np.where(alive, r_em - law, 0.0))
            for i in range(ens.n_paths):
                path = ens.path(i)
                cov = analytic_cov(path, spec.cov_rate)
                g = gamma_G(gf.quadratic(), path, cov)
                s = path.stop_index if path.stop_index is not None \
                    else ens.grid.n_steps
                gamma_dev = max(gamma_dev, float(
                    np.abs(g.values[:s + 1] - times[:s + 1]).max()))
                bound = p["Q0"] - 0.5 - 1e-3
                if path.hit_time is not None and path.hit_time < bound:
                    stop_bound_bad += 1
        elif name == "spiral":
            # radius law needs Phi(t); recover it from the amplitude
            amp = np.sqrt(np.maximum(
                2.0 * radial_r_many(pts) / 3.0, 0.0))
            law = 1.0 / 3.0 + 1.5 * amp ** 2
            circle_dev = max(circle_dev, float(np.abs(
                (pts ** 2).sum(axis=2) - law).max()))
            for i in range(ens.n_paths):
                path = ens.path(i)
                cov = analytic_cov(path, spec.cov_rate)
                a = alpha_decompose(cov)
                lam = eigvals_sym3_many(a.alphas[~a.degenerate])
                if lam.size:
                    eig2_min = min(eig2_min, float(lam[:, 1].min()))
                slope_min = min(slope_min, float(
                    (a.gamma_q_increments / ens.grid.dt).min()))
        elif name == "stationary_circle":
            delta = p["delta"]
            law = 1.0 / 3.0 + 1.5 * delta * delta
            circle_dev = max(circle_dev, float(np.abs(
                (pts ** 2).sum(axis=2) - law).max()))
            from .strategies import additive_generate
            q0 = 2.0 / 3.0 - 1.5 * delta * delta
            Gstar = gf.normalized(gf.quadratic(), pts[0, 0])
            slope = 1.5 * delta * delta / q0
            for i in range(ens.n_paths):
                path = ens.path(i)
                cov = analytic_cov(path, spec.cov_rate)
                _, V = additive_generate(Gstar, path, cov)
                wealth_dev = max(wealth_dev, float(np.abs(
                    V.values - (1.0 + slope * times)).max()))
        elif name == "lyapunov_flow":
            G = None
            for cand in (gf.entropy(), gf.quadratic(), gf.geom_mean()):
                if cand.label == p["G"]:
                    G = cand
            g0, gfrak = p["G0"], p["gfrak"]
            if G is not None:
                alive = ens.stop_index[:, None] \
                    >= np.arange(len(times))[None, :]
                vals = G.value_many(
                    np.maximum(pts, 0.0).reshape(-1, 3)).reshape(pts.shape[:2])
                g_errs.append(np.where(alive, vals - (g0 - times), 0.0))
            hits = ens.hit_time[np.isfinite(ens.hit_time)]
            if hits.size:
                hit_lo_dev = max(hit_lo_dev, float(
                    np.maximum(g0 - gfrak - hits, 0.0).max()))
                hit_hi_dev = max(hit_hi_dev, float(
                    np.maximum(hits - g0, 0.0).max()))
        elif name == "reflected2":
            a, b = p["a"], p["b"]
            fold_dev = max(fold_dev, float(np.maximum(
                np.maximum(a - pts[:, :, 0], pts[:, :, 0] - b), 0.0).max()))
            for i in range(min(ens.n_paths, 50)):
                path = ens.path(i)
                cov = analytic_cov(path, spec.cov_rate)
                al = alpha_decompose(cov)
                lam = np.sort(np.linalg.eigvalsh(
                    al.alphas[~al.degenerate]), axis=1)
                if lam.size:
                    alpha_eig_dev = max(alpha_eig_dev, float(
                        np.abs(lam - np.array([0.0, 1.0])).max()))

    checks.append(_check("weights_sum_to_one", sum_dev, 1e-12))
    if name == "expanding_circle":
        checks.append(_check("radial_law_oracle_rel", oracle_r_dev, 1e-12))
        checks.append(_check("radial_law_em_mean_rel",
                             _mean_abs_over_paths(np.vstack(em_r_errs)),
                             1e-2))
        checks.append(_check("circle_radius_oracle", circle_dev, 1e-12))
    elif name == "slowed":
        checks.append(_check("radial_law_em_mean_abs",
                             _mean_abs_over_paths(np.vstack(em_r_errs)),
                             1e-3))
        checks.append(_check("trace_functional_unit_slope", gamma_dev, 1e-10))
        checks.append(_check("stop_time_lower_bound_violations",
                             stop_bound_bad, 0))
    elif name == "spiral":
        checks.append(_check("circle_radius_mapped", circle_dev, 1e-12))
        checks.append(_check("trace_slope_at_least_quarter_r0",
                             max(p["delta"] ** 2 * 1.5 / 4.0 - slope_min, 0.0)
                             if math.isfinite(slope_min) else math.inf,
                             1e-10))
        checks.append(_check("second_eigenvalue_positive",
                             max(-eig2_min, 0.0) if math.isfinite(eig2_min)
                             else math.inf, 0.0))
    elif name == "stationary_circle":
        checks.append(_check("circle_radius_mapped", circle_dev, 1e-12))
        checks.append(_check("sure_profit_wealth_linear", wealth_dev, 1e-10))
    elif name == "lyapunov_flow":
        if g_errs:
            checks.append(_check("g_value_unit_decay_mean_abs",
                                 _mean_abs_over_paths(np.vstack(g_errs)),
                                 1e-3))
        checks.append(_check("hit_time_above_lower_bound", hit_lo_dev, 1e-2))
        checks.append(_check("hit_time_below_upper_bound", hit_hi_dev, 1e-2))
    elif name == "reflected2":
        checks.append(_check("folding_keeps_band", fold_dev, 0.0))
        checks.append(_check("alpha_eigenvalues_zero_one", alpha_eig_dev,
                             1e-12))
    return checks


# --- reports -------------------------------------------------------------


def build_report(model: str, strategy: str, T: float, cfg: SimConfig,
                 verdict: Optional[ArbVerdict] = None,
                 stats: Optional[dict] = None,
                 identities: Optional[List[dict]] = None) -> dict:
    body = {
        "model": model,
        "strategy": strategy,
        "T": T,
        "dt": cfg.dt,
        "n_paths": cfg.n_paths,
        "seed": cfg.seed,
        "verdict": verdict.verdict if verdict else None,
        "stats": dict(stats or {}),
        "identities": list(identities or []),
    }
    if verdict:
        body["stats"]["arb"] = asdict(verdict)
    return body


def report_json(body: dict, timestamp: str = "") -> str:
    """Serialize with the volatile timestamp isolated in a header so the
    report body is byte-identical across reruns."""
    return json.dumps({"header": {"timestamp": timestamp}, "report": body},
                      sort_keys=True, indent=2)
