"""Command line front end.

Subcommands: ``zoo`` (catalogue), ``simulate``, ``strategy``, ``verify``
(config driven), and ``ingest`` (capitalization CSV).  Exit codes: 0 on
success, 1 on configuration or validation errors, 2 when an identity
suite reports a failure.
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import genfn as gf
from .arbitrage import (arb_verdict, build_report, identity_suite,
                        martingale_mean_test, report_json, terminal_weights)
from .config import experiment_from_dict, load_config, require
from .errors import SptError
from .ingest import (empirical_gamma_H, gamma_H_to_csv, read_caps,
                     summary_json)
from .models import (MODEL_IDS, SimConfig, ensemble_to_csv, initial_weights,
                     parse_model, simulate_em)
from .quadvar import analytic_cov, realized_cov
from .strategies import (additive_generate, market_strategy,
                         multiplicative_generate, one_asset_arbitrage,
                         power_psi, strategy_to_csv, switching_arbitrage,
                         wealth_selffinancing)

ZOO_EXAMPLES = {
    "expanding_circle": "expanding_circle:delta=0.1,u=0.0",
    "slowed": "slowed:w0=[0.5,0.3,0.2]",
    "spiral": "spiral:delta=0.01",
    "stationary_circle": "stationary_circle:delta=0.1",
    "lyapunov_flow": "lyapunov_flow:G=geom_mean,mu0=[0.5,0.3,0.2]",
    "reflected2": "reflected2:mu1_0=0.5,kappa=0.3",
}


def _timestamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def cmd_zoo(args) -> int:
    if args.action == "list":
        for mid in MODEL_IDS:
            print(mid)
        return 0
    spec = parse_model(ZOO_EXAMPLES[args.model]
                       if args.model in ZOO_EXAMPLES else args.model)
    print(f"model: {spec.name}")
    print(f"dimension: {spec.d}, drivers: {spec.n_drivers}")
    print(f"example id: {ZOO_EXAMPLES.get(spec.name, spec.name)}")
    print(f"description: {spec.description}")
    print(f"deflator: {spec.deflator_note}")
    if spec.default_horizon is not None:
        print(f"default horizon: {spec.default_horizon:.6g}")
    print(f"exact oracle available: {spec.oracle is not None}")
    return 0


def _load_experiment(args):
    cfg = load_config(args.config)
    if args.out is not None:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    return experiment_from_dict(cfg)


def _sim_config(exp):
    return SimConfig(dt=exp.dt, T=exp.T, n_paths=exp.n_paths, seed=exp.seed,
                     boundary_epsilon=exp.boundary_epsilon)


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def _kv(spec_str):
    _, _, rest = spec_str.partition(":")
    return dict(p.split("=") for p in rest.split(",") if "=" in p)


def _make_strategy(exp, spec, path, cov):
    kind = exp.strategy.partition(":")[0]
    if kind == "market":
        s = market_strategy(path.grid, spec.d)
        return s, wealth_selffinancing(s, path)
    if kind in ("additive", "multiplicative"):
        gid = exp.strategy.partition(":")[2]
        G = gf.parse_genfn(gid, mu0=path.points[0])
        gen = additive_generate if kind == "additive" \
            else multiplicative_generate
        return gen(G, path, cov)
    if kind == "power":
        q = float(_kv(exp.strategy)["q"])
        return power_psi(q, path, cov)
    if kind == "one_asset":
        eta = float(_kv(exp.strategy)["eta"])
        s, w, _, _ = one_asset_arbitrage(exp.T, eta, path, cov)
        return s, w
    if kind == "switching":
        kv = _kv(exp.strategy)
        G = gf.parse_genfn(kv["G"], mu0=path.points[0])
        s, w, _ = switching_arbitrage(G, float(kv.get("h", 0.0)),
                                      float(kv["eta"]), exp.T, path, cov)
        return s, w
    raise SptError(f"unknown strategy spec {exp.strategy!r}")


def cmd_simulate(args) -> int:
    exp = _load_experiment(args)
    spec = parse_model(exp.model)
    cfg = _sim_config(exp)
    os.makedirs(exp.out, exist_ok=True)
    ens = simulate_em(spec, cfg)
    ensemble_to_csv(ens, os.path.join(exp.out, "ensemble.csv"))
    hits = ens.hit_time[np.isfinite(ens.hit_time)]
    mm = martingale_mean_test(ens.points[:, -1], initial_weights(spec)) \
        if cfg.n_paths >= 100 else None
    body = build_report(exp.model, None, exp.T, cfg, stats={
        "hitting": {
            "n_stopped": int((ens.stop_index < cfg.n_steps).sum()),
            "mean": float(hits.mean()) if hits.size else None,
            "min": float(hits.min()) if hits.size else None,
            "max": float(hits.max()) if hits.size else None,
        },
        "martingale_mean": mm,
    })
    _write(os.path.join(exp.out, "summary.json"),
           report_json(body, _timestamp()))
    return 0


def cmd_strategy(args) -> int:
    exp = _load_experiment(args)
    spec = parse_model(exp.model)
    cfg = _sim_config(exp)
    os.makedirs(exp.out, exist_ok=True)
    ens = simulate_em(spec, cfg, path_ids=np.arange(min(cfg.n_paths, 1)))
    path = ens.path(0)
    cov = analytic_cov(path, spec.cov_rate) if spec.cov_rate is not None \
        else realized_cov(path)
    strat, wealth = _make_strategy(exp, spec, path, cov)
    strategy_to_csv(strat, wealth, os.path.join(exp.out, "strategy.csv"))
    oracle = wealth_selffinancing(strat, path)
    body = build_report(exp.model, exp.strategy, exp.T, cfg, stats={
        "terminal_wealth": wealth.terminal(),
        "terminal_wealth_oracle": oracle.terminal(),
        "long_only": strat.is_long_only(),
        "max_formula_vs_oracle": float(
            np.abs(wealth.values - oracle.values).max()),
    })
    _write(os.path.join(exp.out, "summary.json"),
           report_json(body, _timestamp()))
    return 0


def cmd_verify(args) -> int:
    exp = _load_experiment(args)
    spec = parse_model(exp.model)
    cfg = _sim_config(exp)
    os.makedirs(exp.out, exist_ok=True)
    identities = identity_suite(spec, cfg)
    verdict = None
    if exp.strategy != "market":
        ens = simulate_em(spec, cfg)

        def make(path, _e, _i):
            cov = analytic_cov(path, spec.cov_rate) \
                if spec.cov_rate is not None else realized_cov(path)
            return _make_strategy(exp, spec, path, cov)[0]

        verdict = arb_verdict(ens, make, min(exp.T, cfg.grid().horizon),
                              tol=1e-6 + 10.0 * cfg.dt)
    body = build_report(exp.model, exp.strategy, exp.T, cfg,
                        verdict=verdict, identities=identities)
    _write(os.path.join(exp.out, "report.json"),
           report_json(body, _timestamp()))
    ok = all(c["pass"] for c in identities)
    return 0 if ok else 2


def cmd_ingest(args) -> int:
    caps = read_caps(args.file)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    g, summary = empirical_gamma_H(caps)
    gamma_H_to_csv(g, os.path.join(out, "gammaH.csv"))
    _write(os.path.join(out, "gammaH.json"), summary_json(summary))
    print(f"total={summary.total:.6g} eta_hat={summary.eta_hat:.6g} "
          f"slope_check={summary.slope_check}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="sptlab",
        description=("Simulation laboratory for market-weight diffusions, "
                     "functionally generated strategies and relative "
                     "arbitrage"))
    sub = p.add_subparsers(dest="cmd", required=True)

    z = sub.add_parser("zoo", help="model catalogue")
    z.add_argument("action", choices=["list", "describe"])
    z.add_argument("model", nargs="?")

    for name, fn in (("simulate", cmd_simulate), ("strategy", cmd_strategy),
                     ("verify", cmd_verify)):
        s = sub.add_parser(name, help=f"{name} from a config file")
        s.add_argument("--config", required=True)
        s.add_argument("--out", default=None)
        s.add_argument("--seed", type=int, default=None)
        s.set_defaults(fn=fn)

    i = sub.add_parser("ingest", help="capitalization CSV to excess growth")
    i.add_argument("file")
    i.add_argument("--out", default=None)
    i.set_defaults(fn=cmd_ingest)

    z.set_defaults(fn=cmd_zoo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "zoo" and args.action == "describe" and not args.model:
        print("zoo describe needs a model id", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except (SptError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
