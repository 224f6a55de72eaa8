"""Market-model zoo and the Euler-Maruyama simulation engine.

Six three-asset (one two-asset) models of market weights on the simplex:
an expanding circle, its slowed-down time change, a spiral with an extra
radial diffusion, a stationary circle with drift, level-set flows driven
by a concave generating function, and a reflected two-asset model.  Each
model carries vectorized drift/diffusion fields or an exact driver map,
an analytic covariation rate, and stopping metadata.  The engine steps
ensembles with per-path counter-based random streams so results do not
depend on scheduling.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.random import Generator, Philox

from . import genfn as gf
from .errors import AtNode, SpecViolation, UnknownModel
from .simplex import TimeGrid, WeightPath, radial_r

TWO_PI_3 = 2.0 * math.pi / 3.0
PHASES = np.array([0.0, TWO_PI_3, 2.0 * TWO_PI_3])


@dataclass(frozen=True)
class ModelSpec:
    """Closed description of one market model.

    Either an SDE form (drift/diffusion fields over weights) or a mapped
    form (driver state evolved exactly, weights by closed form).
    """

    name: str
    d: int
    n_drivers: int
    params: dict
    kind: str                                   # "sde" or "mapped"
    drift: Optional[Callable] = None            # (t, X[N,d]) -> [N,d]
    diffusion: Optional[Callable] = None        # (t, X[N,d]) -> [N,d,m]
    state0: Optional[np.ndarray] = None         # (k,) driver state
    step_state: Optional[Callable] = None       # (t, S[N,k], dW[N,m]) -> S
    weights_of: Optional[Callable] = None       # (t, S[N,k]) -> [N,d]
    cov_rate: Optional[Callable] = None         # (t, X[N,d]) -> [N,d,d]
    oracle: Optional[Callable] = None           # (times[n+1], W[n+1,m]) -> pts
    default_horizon: Optional[float] = None
    stops_at_boundary: bool = True
    deflator_note: str = ""
    description: str = ""


@dataclass(frozen=True)
class SimConfig:
    """Simulation scale: step, horizon, ensemble size, seed."""

    dt: float
    T: float
    n_paths: int
    seed: int
    boundary_epsilon: float = 0.0

    def __post_init__(self):
        if self.dt <= 0 or self.T < self.dt or self.n_paths < 1:
            raise ValueError("need dt > 0, T >= dt, n_paths >= 1")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    def grid(self):
        return TimeGrid(t0=0.0, dt=self.dt, n_steps=self.n_steps)


@dataclass(frozen=True)
class Ensemble:
    """Simulated paths with their Brownian increments and hit records.

    stop_index[i] == n_steps means path i ran to the horizon; hit_time is
    NaN in that case, else the interpolated boundary crossing time.
    """

    grid: TimeGrid
    points: np.ndarray                 # (N, n_steps+1, d)
    increments: np.ndarray             # (N, n_steps, m)
    stop_index: np.ndarray             # (N,) int
    hit_time: np.ndarray               # (N,) float
    path_ids: np.ndarray               # (N,) int

    @property
    def n_paths(self):
        return self.points.shape[0]

    def path(self, i) -> WeightPath:
        n = self.grid.n_steps
        stop = int(self.stop_index[i])
        ht = float(self.hit_time[i])
        return WeightPath(grid=self.grid, points=self.points[i],
                          stop_index=stop if stop < n else None,
                          hit_time=ht if math.isfinite(ht) else None)

    def driver_path(self, i):
        """Cumulative driver values W(t_k), shape (n_steps+1, m)."""
        m = self.increments.shape[2]
        W = np.zeros((self.grid.n_times, m))
        W[1:] = np.cumsum(self.increments[i], axis=0)
        return W


def path_rng(seed: int, path_id: int) -> Generator:
    """Counter-based stream for one path; independent across paths and
    identical regardless of execution order."""
    return Generator(Philox(key=np.array([seed, path_id], dtype=np.uint64)))


def brownian_increments(seed, path_ids, n_steps, m, dt):
    """Per-path N(0, dt) increments, (N, n_steps, m)."""
    N = len(path_ids)
    out = np.empty((N, n_steps, m))
    s = math.sqrt(dt)
    for j, p in enumerate(path_ids):
        out[j] = path_rng(seed, int(p)).standard_normal((n_steps, m)) * s
    return out


def _check_structure(spec: ModelSpec, x0, tol=1e-12):
    if spec.kind != "sde":
        return
    X = x0[None, :]
    mu = spec.drift(0.0, X)
    sig = spec.diffusion(0.0, X)
    if abs(float(mu.sum())) > tol or np.abs(sig.sum(axis=1)).max() > tol:
        raise SpecViolation(
            "drift rows / diffusion columns must sum to zero")


def initial_weights(spec: ModelSpec) -> np.ndarray:
    if spec.kind == "sde":
        return np.asarray(spec.params["x0"], float)
    return spec.weights_of(0.0, spec.state0[None, :])[0]


def coarsen_increments(dW, factor: int):
    """Aggregate per-step increments into blocks of ``factor`` steps, for
    convergence studies on shared noise."""
    N, n, m = dW.shape
    if n % factor:
        raise ValueError("step count not divisible by the factor")
    return dW.reshape(N, n // factor, factor, m).sum(axis=2)


def simulate_em(spec: ModelSpec, cfg: SimConfig,
                path_ids=None, increments=None) -> Ensemble:
    """Euler-Maruyama (or exact driver-map) simulation of an ensemble.

    Paths freeze at the first grid index where a weight drops to
    boundary_epsilon or below; the crossing time is refined by linear
    interpolation of the triggering coordinate.  ``increments`` overrides
    the generated Brownian increments (shared-noise experiments).
    """
    if path_ids is None:
        path_ids = np.arange(cfg.n_paths)
    path_ids = np.asarray(path_ids)
    N = len(path_ids)
    n = cfg.n_steps
    d, m = spec.d, spec.n_drivers
    grid = cfg.grid()
    x0 = initial_weights(spec)
    _check_structure(spec, x0)

    if increments is not None:
        dW = np.asarray(increments)
        if dW.shape != (N, n, m):
            raise ValueError("increments have the wrong shape")
    else:
        dW = brownian_increments(cfg.seed, path_ids, n, m, cfg.dt)
    points = np.empty((N, n + 1, d))
    points[:, 0] = x0
    stop_index = np.full(N, n, dtype=int)
    hit_time = np.full(N, np.nan)
    alive = np.ones(N, dtype=bool)
    eps = cfg.boundary_epsilon

    if spec.kind == "mapped":
        S = np.tile(spec.state0, (N, 1))

    for k in range(n):
        t = grid.t0 + k * cfg.dt
        X = points[:, k]
        Xn = X.copy()
        idx = np.where(alive)[0]
        if idx.size:
            if spec.kind == "sde":
                Xa = X[idx]
                step = spec.diffusion(t, Xa) @ dW[idx, k, :, None]
                Xn[idx] = Xa + step[:, :, 0]
                mu = spec.drift(t, Xa)
                if mu is not None:
                    Xn[idx] += mu * cfg.dt
            else:
                S[idx] = spec.step_state(t, S[idx], dW[idx, k])
                Xn[idx] = spec.weights_of(t + cfg.dt, S[idx])
        points[:, k + 1] = Xn

        if spec.stops_at_boundary and idx.size:
            newly = idx[Xn[idx].min(axis=1) <= eps]
            for j in newly:
                i_min = int(np.argmin(points[j, k + 1]))
                a = points[j, k, i_min] - eps
                b = points[j, k + 1, i_min] - eps
                frac = a / (a - b) if a > b else 1.0
                stop_index[j] = k + 1
                hit_time[j] = t + frac * cfg.dt
                alive[j] = False
        if not alive.any() and k + 1 < n:
            # freeze everything that remains
            points[:, k + 2:] = points[:, k + 1][:, None, :]
            break
    # freeze stopped paths at their crossing point
    for j in np.where(stop_index < n)[0]:
        points[j, stop_index[j] + 1:] = points[j, stop_index[j]]
    return Ensemble(grid=grid, points=points, increments=dW,
                    stop_index=stop_index, hit_time=hit_time,
                    path_ids=path_ids)


def ensemble_chunks(spec: ModelSpec, cfg: SimConfig, chunk=500):
    """Yield Ensembles covering path ids 0..n_paths-1 in chunks, for
    streaming statistics without holding every path in memory."""
    for lo in range(0, cfg.n_paths, chunk):
        ids = np.arange(lo, min(lo + chunk, cfg.n_paths))
        yield simulate_em(spec, cfg, path_ids=ids)


# --- circle-family helpers ----------------------------------------------


def _amp_phase(X):
    """Amplitude and phase of a circle-family point: x_i = 1/3 +
    amp * cos(theta + 2 pi (i-1)/3)."""
    c = X[:, 0] - 1.0 / 3.0
    s = -(X[:, 1] - X[:, 2]) / math.sqrt(3.0)
    return np.hypot(c, s), np.arctan2(s, c)


def _circle_sigma(X):
    """Diffusion column (x2-x3, x3-x1, x1-x2)/sqrt(3)."""
    return np.stack([X[:, 1] - X[:, 2], X[:, 2] - X[:, 0],
                     X[:, 0] - X[:, 1]], axis=1) / math.sqrt(3.0)


def circle_start(delta: float, u: float = 0.0) -> np.ndarray:
    """Circle-family start 1/3 + delta * cos(2 pi u + phase_i)."""
    return 1.0 / 3.0 + delta * np.cos(2.0 * math.pi * u + PHASES)


def model_expanding_circle(v0) -> ModelSpec:
    """Driftless single-driver model whose radial function grows as
    r(v(t)) = r(v(0)) e^t; exact trigonometric solution available."""
    v0 = np.asarray(v0, float)
    r0 = radial_r(v0)
    amp0, theta0 = _amp_phase(v0[None, :])
    amp0, theta0 = float(amp0[0]), float(theta0[0])

    def drift(t, X):
        return np.zeros_like(X)

    def diffusion(t, X):
        return _circle_sigma(X)[:, :, None]

    def cov_rate(t, X):
        s = _circle_sigma(X)
        return s[:, :, None] * s[:, None, :]

    def oracle(times, W):
        amp = amp0 * np.exp(0.5 * np.asarray(times))
        ang = theta0 + W[:, 0, None] + PHASES[None, :]
        return 1.0 / 3.0 + amp[:, None] * np.cos(ang)

    horizon = math.log(1.0 / (6.0 * r0)) if r0 > 0 else None
    return ModelSpec(
        name="expanding_circle", d=3, n_drivers=1,
        params={"x0": v0, "r0": r0, "amp0": amp0, "theta0": theta0},
        kind="sde", drift=drift, diffusion=diffusion, cov_rate=cov_rate,
        oracle=oracle, default_horizon=horizon,
        deflator_note="deflator exists (weights are stopped martingales)",
        description=("single Brownian driver, zero drift, diffusion rows "
                     "(v2-v3, v3-v1, v1-v2)/sqrt(3); r grows as r0*e^t; "
                     "boundary reached no earlier than log(1/(6 r0))"),
    )


def model_slowed(w0) -> ModelSpec:
    """Time-changed circle model with unit trace rate: r(w(t)) = r(w0)+t
    and the trace functional equals t up to the boundary exit."""
    w0 = np.asarray(w0, float)
    r0 = radial_r(w0)
    if r0 <= 0:
        raise AtNode("slowed model needs a start away from the barycenter")
    eps_cap = 1.5 * r0       # cap on 3r; never binds since r is nondecreasing

    def _den(X):
        r = ((X[:, 0] - X[:, 1]) ** 2 + (X[:, 0] - X[:, 2]) ** 2
             + (X[:, 1] - X[:, 2]) ** 2) / 3.0
        return np.sqrt(np.maximum(3.0 * r, eps_cap))

    def drift(t, X):
        return np.zeros_like(X)

    def diffusion(t, X):
        s = _circle_sigma(X) * math.sqrt(3.0) / _den(X)[:, None]
        return s[:, :, None]

    def cov_rate(t, X):
        s = _circle_sigma(X) * math.sqrt(3.0) / _den(X)[:, None]
        return s[:, :, None] * s[:, None, :]

    q0 = 1.0 - float(w0 @ w0)
    return ModelSpec(
        name="slowed", d=3, n_drivers=1,
        params={"x0": w0, "r0": r0, "eps_cap": eps_cap, "Q0": q0},
        kind="sde", drift=drift, diffusion=diffusion, cov_rate=cov_rate,
        default_horizon=max(q0 - 0.5, 0.0) or None,
        deflator_note="deflator exists (weights are stopped martingales)",
        description=("circle diffusion divided by sqrt(3 r(w)) with a cap "
                     "keeping coefficients Lipschitz; r(w(t)) = r0 + t and "
                     "the trace functional has unit slope before exit"),
    )


def model_spiral(delta: float) -> ModelSpec:
    """Two-driver model: circle phase W plus a bounded radial factor
    Phi = 2 delta + Psi with dPsi = (Psi-delta)(Psi+delta) dB."""
    if not 0.0 < delta < 1.0 / 9.0:
        raise ValueError("spiral model needs delta in (0, 1/9)")
    clamp = delta * (1.0 - 1e-9)

    def step_state(t, S, dW):
        out = S.copy()
        out[:, 0] += dW[:, 0]
        psi = S[:, 1]
        out[:, 1] = np.clip(psi + (psi - delta) * (psi + delta) * dW[:, 1],
                            -clamp, clamp)
        return out

    def weights_of(t, S):
        phi = 2.0 * delta + S[:, 1]
        amp = phi * math.exp(0.5 * t)
        return 1.0 / 3.0 + amp[:, None] * np.cos(S[:, 0, None]
                                                 + PHASES[None, :])

    def cov_rate(t, X):
        t = np.broadcast_to(np.asarray(t, float), X.shape[:1])
        amp, theta = _amp_phase(X)
        phi = amp * np.exp(-0.5 * t)
        psi = phi - 2.0 * delta
        ang = theta[:, None] + PHASES[None, :]
        a1 = -amp[:, None] * np.sin(ang)
        a2 = (np.exp(0.5 * t) * (psi * psi - delta * delta))[:, None] \
            * np.cos(ang)
        return a1[:, :, None] * a1[:, None, :] + a2[:, :, None] * a2[:, None, :]

    return ModelSpec(
        name="spiral", d=3, n_drivers=2,
        params={"delta": delta},
        kind="mapped", state0=np.array([0.0, 0.0]),
        step_state=step_state, weights_of=weights_of, cov_rate=cov_rate,
        default_horizon=-2.0 * math.log(9.0 * delta),
        deflator_note="deflator exists on the stated horizon",
        description=("weights 1/3 + Phi e^{t/2} cos(W + phase) with "
                     "Phi = 2 delta + Psi in (delta, 3 delta); two "
                     "independent drivers; nondegenerate covariation"),
    )


def model_stationary_circle(delta: float) -> ModelSpec:
    """Single-driver circle of fixed radius: weights rotate but do not
    spread, so the trace functional grows linearly forever."""
    if not 0.0 < delta < 1.0 / 3.0:
        raise ValueError("stationary circle needs delta in (0, 1/3)")

    def step_state(t, S, dW):
        return S + dW

    def weights_of(t, S):
        return 1.0 / 3.0 + delta * np.cos(S[:, 0, None] + PHASES[None, :])

    def cov_rate(t, X):
        _, theta = _amp_phase(X)
        s = -delta * np.sin(theta[:, None] + PHASES[None, :])
        return s[:, :, None] * s[:, None, :]

    def oracle(times, W):
        return 1.0 / 3.0 + delta * np.cos(W[:, 0, None] + PHASES[None, :])

    return ModelSpec(
        name="stationary_circle", d=3, n_drivers=1,
        params={"delta": delta, "r": 1.5 * delta * delta},
        kind="mapped", state0=np.array([0.0]),
        step_state=step_state, weights_of=weights_of, cov_rate=cov_rate,
        oracle=oracle, default_horizon=None, stops_at_boundary=False,
        deflator_note="no deflator exists (drift makes growth a sure thing)",
        description=("weights 1/3 + delta cos(W + phase): constant radial "
                     "function 3 delta^2/2, trace functional with slope "
                     "3 delta^2/2, and a sure-profit additive strategy"),
    )


def model_lyapunov_flow(G: gf.GeneratingFunction, mu0,
                        gfrak: Optional[float] = None) -> ModelSpec:
    """Driftless flow along level sets of a concave G, normalized so that
    G(mu(t)) = G(mu0) - t until the boundary exit."""
    mu0 = np.asarray(mu0, float)
    gf.lyapunov_sigma(G, mu0)          # raises at the navel / bad L
    g0 = G.value(mu0)
    if gfrak is None:
        gfrak = gf.boundary_sup(G)

    def drift(t, X):
        return np.zeros_like(X)

    def _sig(X):
        sigma, L = gf.lyapunov_sigma_many(G, X)
        return sigma / np.sqrt(np.maximum(L, 1e-300))[:, None]

    def diffusion(t, X):
        return _sig(X)[:, :, None]

    def cov_rate(t, X):
        s = _sig(X)
        return s[:, :, None] * s[:, None, :]

    return ModelSpec(
        name="lyapunov_flow", d=3, n_drivers=1,
        params={"x0": mu0, "G": G.label, "G0": g0, "gfrak": gfrak},
        kind="sde", drift=drift, diffusion=diffusion, cov_rate=cov_rate,
        default_horizon=g0 * 1.05,
        deflator_note="deflator exists (weights are stopped martingales)",
        description=("diffusion sigma(x)/sqrt(L(x)) from the cyclic "
                     "gradient differences of G; G decreases at unit rate "
                     "and the exit time lies in [G(mu0) - gfrak, G(mu0)]"),
    )


def model_reflected_two_asset(mu1_0: float, kappa: float) -> ModelSpec:
    """Two-asset model: mu1 is Brownian motion with volatility kappa
    folded into [mu1_0/4, 1 - mu1_0/4]; covariation slope kappa^2."""
    if not 0.0 < mu1_0 < 1.0:
        raise ValueError("mu1_0 must lie in (0, 1)")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    a = mu1_0 / 4.0
    b = 1.0 - mu1_0 / 4.0
    period = 2.0 * (b - a)

    def step_state(t, S, dW):
        return S + kappa * dW

    def weights_of(t, S):
        z = np.mod(S[:, 0] - a, period)
        mu1 = a + np.minimum(z, period - z)
        return np.stack([mu1, 1.0 - mu1], axis=1)

    def cov_rate(t, X):
        k2 = kappa * kappa
        base = np.array([[k2, -k2], [-k2, k2]])
        return np.tile(base, (X.shape[0], 1, 1))

    return ModelSpec(
        name="reflected2", d=2, n_drivers=1,
        params={"mu1_0": mu1_0, "kappa": kappa, "a": a, "b": b},
        kind="mapped", state0=np.array([mu1_0]),
        step_state=step_state, weights_of=weights_of, cov_rate=cov_rate,
        default_horizon=None, stops_at_boundary=False,
        deflator_note=("no deflator exists (covariation slope is bounded "
                       "below while the weight stays in a compact band)"),
        description=("mu1 reflected in [mu1_0/4, 1 - mu1_0/4] by folding; "
                     "mu2 = 1 - mu1; exact simulation, covariation slope "
                     "kappa^2 at all times"),
    )


# --- stopping ------------------------------------------------------------


@dataclass(frozen=True)
class HitRecord:
    stop_index: Optional[int]
    hit_time: Optional[float]


def boundary_stop(path: WeightPath, rule: str, n: Optional[int] = None,
                  level: Optional[float] = None):
    """Stop a path at the first index satisfying a rule and freeze it.

    Rules: "exit" (min weight <= 0), "min_weight" (min weight < 1/n),
    "mu1_half" (mu1 <= level, default half its start), "horizon" (never).
    Returns (stopped WeightPath, HitRecord) with the crossing time refined
    by linear interpolation of the triggering coordinate.
    """
    P = path.points
    if rule == "exit":
        vals = P.min(axis=1)
        thresh = 0.0
    elif rule == "min_weight":
        if n is None:
            raise ValueError("min_weight rule needs n")
        vals = P.min(axis=1)
        thresh = 1.0 / n
    elif rule == "mu1_half":
        vals = P[:, 0]
        thresh = level if level is not None else P[0, 0] / 2.0
    elif rule == "horizon":
        return path, HitRecord(None, None)
    else:
        raise ValueError(f"unknown stopping rule {rule!r}")

    hit = np.where(vals <= thresh)[0]
    if hit.size == 0:
        return path, HitRecord(None, None)
    k = int(hit[0])
    if k == 0:
        t_hit = path.grid.t0
    else:
        a = vals[k - 1] - thresh
        bb = vals[k] - thresh
        frac = a / (a - bb) if a > bb else 1.0
        t_hit = path.grid.t0 + (k - 1 + frac) * path.grid.dt
    newpts = P.copy()
    newpts[k:] = P[k]
    stopped = WeightPath(grid=path.grid, points=newpts, stop_index=k,
                         hit_time=t_hit)
    return stopped, HitRecord(k, t_hit)


# --- model ids -----------------------------------------------------------


def _split_params(s: str):
    """Split 'a=1,b=[1,2],c=x' on commas outside brackets."""
    parts, depth, cur = [], 0, ""
    for ch in s:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur:
        parts.append(cur)
    out = {}
    for p in parts:
        k, _, v = p.partition("=")
        out[k.strip()] = v.strip()
    return out


def _vec(s: str):
    return np.array([float(v) for v in s.strip("[]").split(",") if v])


MODEL_IDS = ("expanding_circle", "slowed", "spiral", "stationary_circle",
             "lyapunov_flow", "reflected2")


def parse_model(spec_str: str) -> ModelSpec:
    """Build a ModelSpec from an id like ``expanding_circle:delta=0.1,u=0``
    or ``lyapunov_flow:G=geom_mean,mu0=[0.5,0.3,0.2]``."""
    name, _, rest = spec_str.strip().partition(":")
    kv = _split_params(rest) if rest else {}
    try:
        if name == "expanding_circle":
            if "v0" in kv:
                return model_expanding_circle(_vec(kv["v0"]))
            return model_expanding_circle(circle_start(
                float(kv["delta"]), float(kv.get("u", 0.0))))
        if name == "slowed":
            return model_slowed(_vec(kv["w0"]))
        if name == "spiral":
            return model_spiral(float(kv["delta"]))
        if name == "stationary_circle":
            return model_stationary_circle(float(kv["delta"]))
        if name == "lyapunov_flow":
            G = gf.parse_genfn(kv["G"])
            return model_lyapunov_flow(G, _vec(kv["mu0"]))
        if name == "reflected2":
            return model_reflected_two_asset(float(kv["mu1_0"]),
                                             float(kv["kappa"]))
    except KeyError as e:
        raise ValueError(f"model {name!r} is missing parameter {e}") from e
    raise UnknownModel(name)


def ensemble_to_csv(e: Ensemble, path):
    t = e.grid.times()
    d = e.points.shape[2]
    rows = []
    for i in range(e.n_paths):
        block = np.column_stack(
            [t, np.full_like(t, e.path_ids[i], dtype=float), e.points[i]])
        rows.append(block)
    header = "t,path_id," + ",".join(f"mu{j + 1}" for j in range(d))
    np.savetxt(path, np.vstack(rows), delimiter=",", header=header,
               comments="", fmt="%.17g")
