"""Flat key=value experiment configuration.

Format: one ``key = value`` pair per line; ``#`` starts a comment; values
are parsed as int, float, bool, bracketed float list, or string.  Keys
used by the command line front end:

    model       model id string (see models.parse_model)
    strategy    strategy spec: market | additive:<G> | multiplicative:<G>
                | power:q=<float> | one_asset:eta=<float>
                | switching:G=<G>,h=<float>,eta=<float>
    G           generating function id (see genfn.parse_genfn)
    dt, T       step and horizon in years
    n_paths     ensemble size
    seed        64-bit integer
    out         output directory
    threads     parallelism cap (simulation is deterministic regardless)
"""

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError

REQUIRED_SIM_KEYS = ("dt", "T", "n_paths", "seed")


def _parse_value(raw: str):
    s = raw.strip()
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    if s.startswith("[") and s.endswith("]"):
        inner = s[1:-1].strip()
        return [float(v) for v in inner.split(",")] if inner else []
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}",
                              f"line {lineno}: expected key = value")
        key, _, val = body.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}",
                              f"line {lineno}: empty key")
        out[key] = _parse_value(val)
    return out


def load_config(path) -> dict:
    with open(path) as f:
        return parse_config_text(f.read())


def require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(key, f"config is missing required key {key!r}")
    return cfg[key]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description for the command line front end."""

    model: str
    dt: float
    T: float
    n_paths: int
    seed: int
    out: str = "."
    strategy: str = "market"
    threads: int = 1
    boundary_epsilon: float = 0.0
    extras: dict = field(default_factory=dict)


def experiment_from_dict(cfg: dict) -> ExperimentConfig:
    model = str(require(cfg, "model"))
    for key in REQUIRED_SIM_KEYS:
        require(cfg, key)
    known = {"model", "dt", "T", "n_paths", "seed", "out", "strategy",
             "threads", "boundary_epsilon"}
    extras = {k: v for k, v in cfg.items() if k not in known}
    try:
        return ExperimentConfig(
            model=model,
            dt=float(cfg["dt"]),
            T=float(cfg["T"]),
            n_paths=int(cfg["n_paths"]),
            seed=int(cfg["seed"]),
            out=str(cfg.get("out", ".")),
            strategy=str(cfg.get("strategy", "market")),
            threads=int(cfg.get("threads", 1)),
            boundary_epsilon=float(cfg.get("boundary_epsilon", 0.0)),
            extras=extras,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError("config", f"bad value: {e}") from e
