"""Generating functions on the simplex: value, gradient, Hessian.

Built-ins: entropy, quadratic, geometric mean, and the single-coordinate
power function.  Affine combinators cover normalization (G / G(mu0)) and
the shifted-scaled variant (G - h) * 3 / (eta * T) used by the switching
strategy.  ``lyapunov_sigma`` supplies the cyclic gradient-difference
diffusion field and its normalizer L for the level-set flow models (d = 3).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AtNavel, BoundaryEvaluation, NonpositiveL

_INTERIOR_EPS = 0.0   # strict positivity is the interior test


@dataclass(frozen=True)
class GeneratingFunction:
    """Twice-differentiable function on the simplex with closed forms.

    ``value_many`` / ``grad_many`` / ``hess_many`` take an (N, d) array of
    points and return (N,), (N, d), (N, d, d) arrays.  Scalar entry points
    wrap them.
    """

    label: str
    value_many: Callable[[np.ndarray], np.ndarray]
    grad_many: Callable[[np.ndarray], np.ndarray]
    hess_many: Callable[[np.ndarray], np.ndarray]
    boundary_ok: bool = False          # gradient/Hessian defined at boundary?

    def value(self, x):
        return float(self.value_many(np.asarray(x, float)[None, :])[0])

    def grad(self, x):
        return self.grad_many(np.asarray(x, float)[None, :])[0]

    def hess(self, x):
        return self.hess_many(np.asarray(x, float)[None, :])[0]


def _require_interior(X, label):
    if (X <= _INTERIOR_EPS).any():
        raise BoundaryEvaluation(
            f"{label}: gradient/Hessian undefined at boundary points")


# --- built-in catalog ---------------------------------------------------


def entropy() -> GeneratingFunction:
    """Entropy -sum x_i log x_i, with the 0 * log(1/0) = 0 convention."""

    def value_many(X):
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(X > 0, -X * np.log(np.where(X > 0, X, 1.0)), 0.0)
        return terms.sum(axis=1)

    def grad_many(X):
        _require_interior(X, "entropy")
        return -np.log(X) - 1.0

    def hess_many(X):
        _require_interior(X, "entropy")
        N, d = X.shape
        H = np.zeros((N, d, d))
        idx = np.arange(d)
        H[:, idx, idx] = -1.0 / X
        return H

    return GeneratingFunction("entropy", value_many, grad_many, hess_many)


def quadratic() -> GeneratingFunction:
    """1 - sum x_i^2; gradient -2x, Hessian -2I; fine at the boundary."""

    def value_many(X):
        return 1.0 - (X * X).sum(axis=1)

    def grad_many(X):
        return -2.0 * X

    def hess_many(X):
        N, d = X.shape
        return np.tile(-2.0 * np.eye(d), (N, 1, 1))

    return GeneratingFunction("quadratic", value_many, grad_many, hess_many,
                              boundary_ok=True)


def geom_mean() -> GeneratingFunction:
    """Geometric mean (prod x_i)^(1/d)."""

    def value_many(X):
        d = X.shape[1]
        return np.prod(X, axis=1) ** (1.0 / d)

    def grad_many(X):
        _require_interior(X, "geom_mean")
        d = X.shape[1]
        R = np.prod(X, axis=1) ** (1.0 / d)
        return R[:, None] / (d * X)

    def hess_many(X):
        _require_interior(X, "geom_mean")
        N, d = X.shape
        R = np.prod(X, axis=1) ** (1.0 / d)
        inv = 1.0 / X
        H = (R[:, None, None] / d ** 2) * inv[:, :, None] * inv[:, None, :]
        idx = np.arange(d)
        H[:, idx, idx] -= R[:, None] / (d * X * X)
        return H

    return GeneratingFunction("geom_mean", value_many, grad_many, hess_many)


def power(q: float) -> GeneratingFunction:
    """x_1^q for q >= 1; convex for q > 1."""
    if q < 1:
        raise ValueError(f"power exponent must satisfy q >= 1, got {q}")

    def value_many(X):
        return X[:, 0] ** q

    def grad_many(X):
        N, d = X.shape
        G = np.zeros((N, d))
        if q == 1:
            G[:, 0] = 1.0
        else:
            G[:, 0] = q * X[:, 0] ** (q - 1.0)
        return G

    def hess_many(X):
        N, d = X.shape
        H = np.zeros((N, d, d))
        if q not in (1.0,):
            if q == 2.0:
                H[:, 0, 0] = 2.0
            else:
                H[:, 0, 0] = q * (q - 1.0) * X[:, 0] ** (q - 2.0)
        return H

    return GeneratingFunction(f"power:q={q:g}", value_many, grad_many,
                              hess_many, boundary_ok=(q >= 2))


# --- affine combinators -------------------------------------------------


def affine(base: GeneratingFunction, scale: float, offset: float,
           label: Optional[str] = None) -> GeneratingFunction:
    """scale * G + offset, with gradient/Hessian scaled accordingly."""
    lab = label or f"{base.label}*{scale:g}+{offset:g}"
    return GeneratingFunction(
        lab,
        lambda X: scale * base.value_many(X) + offset,
        lambda X: scale * base.grad_many(X),
        lambda X: scale * base.hess_many(X),
        boundary_ok=base.boundary_ok,
    )


def normalized(base: GeneratingFunction, mu0) -> GeneratingFunction:
    """G / G(mu0), the variant generating arbitrage past G(mu0)/eta."""
    g0 = base.value(np.asarray(mu0, float))
    if g0 <= 0:
        raise ValueError(f"normalization needs G(mu0) > 0, got {g0}")
    return affine(base, 1.0 / g0, 0.0, label=f"{base.label}/[{g0:g}]")


def shift_scale(base: GeneratingFunction, h: float, eta: float,
                T: float) -> GeneratingFunction:
    """(G - h) * 3 / (eta * T), the switching strategy's generator."""
    if eta <= 0 or T <= 0:
        raise ValueError("shift_scale needs eta > 0 and T > 0")
    c = 3.0 / (eta * T)
    return affine(base, c, -c * h,
                  label=f"({base.label}-{h:g})*3/({eta:g}*{T:g})")


# --- level-set flow coefficients ----------------------------------------


def lyapunov_sigma(G: GeneratingFunction, x, navel_tol=1e-10):
    """Cyclic gradient differences sigma and normalizer L at an interior
    3-d point.

    sigma = (D3G - D2G, D1G - D3G, D2G - D1G); L = -sigma' D2G sigma / 2.
    sigma sums to zero and is orthogonal to the gradient by construction.
    """
    x = np.asarray(x, float)
    if x.shape != (3,):
        raise ValueError("lyapunov_sigma is defined for d = 3 only")
    g = G.grad(x)
    sigma = np.array([g[2] - g[1], g[0] - g[2], g[1] - g[0]])
    if np.linalg.norm(sigma) < navel_tol:
        raise AtNavel("sigma vanishes: x is the interior maximizer")
    H = G.hess(x)
    L = -0.5 * float(sigma @ H @ sigma)
    if L <= 0:
        raise NonpositiveL(L)
    return sigma, L


def lyapunov_sigma_many(G: GeneratingFunction, X):
    """Vectorized sigma and L over an (N, 3) array; no navel check."""
    g = G.grad_many(X)
    sigma = np.stack([g[:, 2] - g[:, 1], g[:, 0] - g[:, 2],
                      g[:, 1] - g[:, 0]], axis=1)
    H = G.hess_many(X)
    L = -0.5 * np.einsum("ni,nij,nj->n", sigma, H, sigma)
    return sigma, L


def L_star_geom_mean(X):
    """Closed-form normalizer r(x) / (2 R(x)^5) for the geometric-mean
    flow written with the scale-free vector (1/x_{i-1} - 1/x_{i+1}).

    The gradient-difference normalizer of ``lyapunov_sigma`` relates to
    it by L = (R^2/9) L*; both give the same diffusion sigma/sqrt(L).
    """
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[None, :]
    r = ((X[:, 0] - X[:, 1]) ** 2 + (X[:, 0] - X[:, 2]) ** 2
         + (X[:, 1] - X[:, 2]) ** 2) / 3.0
    R = np.prod(X, axis=1) ** (1.0 / 3.0)
    out = r / (2.0 * R ** 5)
    return out if out.size > 1 else float(out[0])


def L_closed_entropy(X):
    """Closed-form normalizer sum_i (1/(2 x_i)) log(x_{i+1}/x_{i-1})^2
    for the entropy flow; equals the gradient-difference normalizer."""
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[None, :]
    lg = np.log(X)
    out = ((lg[:, 1] - lg[:, 2]) ** 2 / (2.0 * X[:, 0])
           + (lg[:, 2] - lg[:, 0]) ** 2 / (2.0 * X[:, 1])
           + (lg[:, 0] - lg[:, 1]) ** 2 / (2.0 * X[:, 2]))
    return out if out.size > 1 else float(out[0])


def boundary_sup(G: GeneratingFunction, n_grid=20001) -> float:
    """Supremum of G over the boundary of the 3-simplex, by edge scan.

    The boundary consists of three edges where one coordinate vanishes;
    G is scanned along each with a uniform parameter grid.
    """
    s = np.linspace(0.0, 1.0, n_grid)
    best = -math.inf
    for hole in range(3):
        pts = np.zeros((n_grid, 3))
        others = [i for i in range(3) if i != hole]
        pts[:, others[0]] = s
        pts[:, others[1]] = 1.0 - s
        best = max(best, float(G.value_many(pts).max()))
    return best


def interior_max(G: GeneratingFunction, n_grid=400) -> float:
    """Maximum of G over a barycentric grid of the closed 3-simplex."""
    vals = []
    for i in range(n_grid + 1):
        x1 = i / n_grid
        j = np.arange(n_grid - i + 1)
        x2 = j / n_grid
        pts = np.column_stack([np.full_like(x2, x1), x2, 1.0 - x1 - x2])
        vals.append(float(G.value_many(np.abs(pts)).max()))
    return max(vals)


def entropy_range_report() -> dict:
    """Numeric boundary supremum and simplex maximum of the entropy
    function for d = 3, with the constants quoted in the source material
    (2 log 2 and 3 log 3) reported alongside for comparison.

    Direct evaluation gives boundary supremum log 2 and maximum log 3;
    the discrepancy with the quoted constants is flagged, not resolved.
    """
    H = entropy()
    g_num = boundary_sup(H)
    m_num = interior_max(H)
    quoted_gap = 2.0 * math.log(2.0)
    quoted_max = 3.0 * math.log(3.0)
    return {
        "boundary_sup_numeric": g_num,
        "max_numeric": m_num,
        "quoted_boundary_sup": quoted_gap,
        "quoted_max": quoted_max,
        "discrepancy_flagged": (abs(g_num - quoted_gap) > 1e-6
                                or abs(m_num - quoted_max) > 1e-6),
    }


# --- string ids ----------------------------------------------------------

def parse_genfn(spec: str, mu0=None) -> GeneratingFunction:
    """Resolve a config string like ``entropy``, ``power:q=2``,
    ``quadratic|normalize`` or ``quadratic|shift_scale:h=0,eta=1,T=0.1``.

    ``normalize`` needs the initial weights mu0.
    """
    parts = spec.strip().split("|")
    base_spec = parts[0]
    if base_spec == "entropy":
        G = entropy()
    elif base_spec == "quadratic":
        G = quadratic()
    elif base_spec == "geom_mean":
        G = geom_mean()
    elif base_spec.startswith("power:"):
        kv = dict(p.split("=") for p in base_spec[len("power:"):].split(","))
        G = power(float(kv["q"]))
    else:
        raise ValueError(f"unknown generating function id {base_spec!r}")
    for mod in parts[1:]:
        if mod == "normalize":
            if mu0 is None:
                raise ValueError("normalize modifier needs mu0")
            G = normalized(G, mu0)
        elif mod.startswith("shift_scale:"):
            kv = dict(p.split("=") for p in mod[len("shift_scale:"):].split(","))
            G = shift_scale(G, float(kv["h"]), float(kv["eta"]), float(kv["T"]))
        else:
            raise ValueError(f"unknown generating function modifier {mod!r}")
    return G
