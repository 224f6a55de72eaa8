"""Quadratic covariation machinery.

Realized and analytic covariation paths, the cumulative volatility
functional Gamma^G, the trace-normalized alpha decomposition, a closed
form symmetric 3x3 eigensolver, and the slope / dominance verdicts used
by the arbitrage harness.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonpositiveWeight, NotSymmetric
from .genfn import GeneratingFunction
from .simplex import TimeGrid, WeightPath


@dataclass(frozen=True)
class CovariationPath:
    """Per-step covariation increments d<mu_i, mu_j> on a uniform grid."""

    grid: TimeGrid
    increments: np.ndarray             # (n_steps, d, d)
    source: str                        # "realized" or "analytic"

    @property
    def d(self):
        return self.increments.shape[1]

    def validate(self, psd_tol=1e-10, rowsum_tol=1e-10):
        if self.increments.shape[0] != self.grid.n_steps:
            raise ValueError("increments do not match grid")
        A = self.increments
        if not np.allclose(A, A.transpose(0, 2, 1), atol=1e-12):
            raise NotSymmetric("covariation increment not symmetric")
        if np.abs(A.sum(axis=2)).max() > rowsum_tol:
            raise ValueError("covariation increment row sums exceed tolerance")
        if np.linalg.eigvalsh(A).min() < -psd_tol:
            raise ValueError("covariation increment not positive semidefinite")
        return self


@dataclass(frozen=True)
class AlphaPath:
    """Trace-normalized covariation increments and the trace itself."""

    grid: TimeGrid
    alphas: np.ndarray                 # (n_steps, d, d)
    gamma_q_increments: np.ndarray     # (n_steps,)
    degenerate: np.ndarray             # (n_steps,) bool, zero-trace steps


@dataclass(frozen=True)
class GammaPath:
    """Cumulative volatility functional on a grid, starting at zero."""

    grid: TimeGrid
    values: np.ndarray                 # (n_steps+1,)

    def increments(self):
        return np.diff(self.values)


def realized_cov(path: WeightPath) -> CovariationPath:
    """Outer products of weight increments, one matrix per step."""
    P = path.points
    if P.shape[0] < 2:
        raise ValueError("need at least two points")
    dP = np.diff(P, axis=0)
    inc = dP[:, :, None] * dP[:, None, :]
    return CovariationPath(grid=path.grid, increments=inc, source="realized")


def analytic_cov(path: WeightPath, rate_fn) -> CovariationPath:
    """Covariation increments rate(t_k, mu(t_k)) * dt from a model's
    instantaneous covariation rate, frozen after the stop index."""
    P = path.points
    n = path.grid.n_steps
    t = path.grid.times()[:-1]
    inc = rate_fn(t, P[:-1]) * path.grid.dt
    if path.stop_index is not None and path.stop_index < n:
        inc[path.stop_index:] = 0.0
    return CovariationPath(grid=path.grid, increments=inc, source="analytic")


def gamma_G(G: GeneratingFunction, path: WeightPath,
            cov: CovariationPath) -> GammaPath:
    """Gamma^G(t) = -1/2 sum_ij int D2_ij G(mu) d<mu_i, mu_j> by
    left-point sums, frozen after the stop index."""
    if cov.grid != path.grid:
        raise ValueError("path and covariation grids differ")
    n = path.grid.n_steps
    stop = path.stop_index if path.stop_index is not None else n
    vals = np.zeros(n + 1)
    if stop > 0:
        H = G.hess_many(path.points[:stop])
        dg = -0.5 * np.einsum("kij,kij->k", H, cov.increments[:stop])
        vals[1:stop + 1] = np.cumsum(dg)
    vals[stop + 1:] = vals[stop]
    return GammaPath(grid=path.grid, values=vals)


def gamma_H_weighted(path: WeightPath) -> GammaPath:
    """Cumulative excess growth 1/2 sum_i int mu_i d<log mu_i>, estimated
    as 1/2 sum_ik mu_i(t_k) (delta log mu_i(t_k))^2.

    This is the estimator intended for empirical capitalization data.
    """
    P = path.points
    n = path.grid.n_steps
    stop = path.stop_index if path.stop_index is not None else n
    if (P[:stop + 1] <= 0).any():
        raise NonpositiveWeight("log increments need strictly positive weights")
    vals = np.zeros(n + 1)
    if stop > 0:
        dlog = np.diff(np.log(P[:stop + 1]), axis=0)
        contrib = 0.5 * (P[:stop] * dlog * dlog).sum(axis=1)
        vals[1:stop + 1] = np.cumsum(contrib)
    vals[stop + 1:] = vals[stop]
    return GammaPath(grid=path.grid, values=vals)


def alpha_decompose(cov: CovariationPath, trace_tol=1e-14) -> AlphaPath:
    """Split each covariation increment into its trace (the Gamma^Q
    increment) and the trace-normalized shape matrix alpha."""
    inc = cov.increments
    traces = np.einsum("kii->k", inc)
    degenerate = traces <= trace_tol
    safe = np.where(degenerate, 1.0, traces)
    alphas = inc / safe[:, None, None]
    alphas[degenerate] = 0.0
    return AlphaPath(grid=cov.grid, alphas=alphas,
                     gamma_q_increments=np.where(degenerate, 0.0, traces),
                     degenerate=degenerate)


def gamma_from_alpha(a: AlphaPath) -> GammaPath:
    vals = np.concatenate([[0.0], np.cumsum(a.gamma_q_increments)])
    return GammaPath(grid=a.grid, values=vals)


def eigen_sym3(m, with_vectors=False, sym_tol=1e-10):
    """Eigenvalues of a symmetric 3x3 matrix, ascending, by the closed
    form trigonometric method; eigenvectors by cross products on request.
    """
    A = np.asarray(m, dtype=float)
    if A.shape != (3, 3):
        raise ValueError("need a 3x3 matrix")
    if np.abs(A - A.T).max() > sym_tol:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    A = 0.5 * (A + A.T)

    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = np.trace(A) / 3.0
    if p1 == 0.0:
        w = np.sort(np.diagonal(A).copy())
    else:
        p2 = ((A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2
              + 2.0 * p1)
        p = math.sqrt(p2 / 6.0)
        B = (A - q * np.eye(3)) / p
        r = np.linalg.det(B) / 2.0
        r = min(1.0, max(-1.0, r))
        phi = math.acos(r) / 3.0
        lam3 = q + 2.0 * p * math.cos(phi)
        lam1 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
        lam2 = 3.0 * q - lam1 - lam3
        w = np.array([lam1, lam2, lam3])
    if not with_vectors:
        return w

    V = np.empty((3, 3))
    for j, lam in enumerate(w):
        M = A - lam * np.eye(3)
        c01 = np.cross(M[0], M[1])
        c02 = np.cross(M[0], M[2])
        c12 = np.cross(M[1], M[2])
        cand = max((c01, c02, c12), key=lambda c: float(c @ c))
        nrm = np.linalg.norm(cand)
        if nrm < 1e-14:
            # repeated eigenvalue: complete an orthonormal set
            prev = V[:, :j].T if j else np.zeros((0, 3))
            for e in np.eye(3):
                v = e - prev.T @ (prev @ e)
                if np.linalg.norm(v) > 1e-8:
                    cand, nrm = v, np.linalg.norm(v)
                    break
        V[:, j] = cand / nrm
    # re-orthogonalize against earlier columns for repeated eigenvalues
    for j in range(1, 3):
        for i in range(j):
            if abs(w[j] - w[i]) < 1e-8:
                V[:, j] -= (V[:, i] @ V[:, j]) * V[:, i]
        nrm = np.linalg.norm(V[:, j])
        if nrm > 1e-14:
            V[:, j] /= nrm
    return w, V


def eigvals_sym3_many(A):
    """Vectorized ascending eigenvalues over an (N, 3, 3) stack of
    symmetric matrices, same trigonometric closed form."""
    A = np.asarray(A, dtype=float)
    p1 = A[:, 0, 1] ** 2 + A[:, 0, 2] ** 2 + A[:, 1, 2] ** 2
    q = np.einsum("kii->k", A) / 3.0
    p2 = ((A[:, 0, 0] - q) ** 2 + (A[:, 1, 1] - q) ** 2
          + (A[:, 2, 2] - q) ** 2 + 2.0 * p1)
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    B = (A - q[:, None, None] * np.eye(3)) / safe_p[:, None, None]
    r = (B[:, 0, 0] * (B[:, 1, 1] * B[:, 2, 2] - B[:, 1, 2] * B[:, 2, 1])
         - B[:, 0, 1] * (B[:, 1, 0] * B[:, 2, 2] - B[:, 1, 2] * B[:, 2, 0])
         + B[:, 0, 2] * (B[:, 1, 0] * B[:, 2, 1] - B[:, 1, 1] * B[:, 2, 0]))
    r = np.clip(r / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam3 = q + 2.0 * p * np.cos(phi)
    lam1 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3
    out = np.stack([lam1, lam2, lam3], axis=1)
    flat = p <= 0
    if flat.any():
        out[flat] = np.sort(np.stack([A[flat, 0, 0], A[flat, 1, 1],
                                      A[flat, 2, 2]], axis=1), axis=1)
    return out


@dataclass(frozen=True)
class SlopeVerdict:
    holds: bool
    first_violation_index: Optional[int]
    max_violation: float


def slope_monotone_check(g: GammaPath, eta: float, window=None,
                         tol=1e-10) -> SlopeVerdict:
    """Check that Gamma picks up at least eta * dt per step on [0, T]."""
    dt = g.grid.dt
    inc = g.increments()
    if window is not None:
        t0, T = window
        times = g.grid.times()[:-1]
        mask = (times >= t0 - 1e-12) & (times + dt <= T + 1e-12)
        inc = inc[mask]
    deficit = eta * dt - inc
    bad = np.where(deficit > tol)[0]
    if bad.size:
        return SlopeVerdict(False, int(bad[0]), float(deficit.max()))
    return SlopeVerdict(True, None, float(max(deficit.max(), 0.0))
                        if deficit.size else 0.0)


def excess_dominance_check(gH: GammaPath, gQ: GammaPath,
                           tol=1e-10) -> SlopeVerdict:
    """Check 2 * dGamma^H >= dGamma^Q per step on a shared grid."""
    if gH.grid != gQ.grid:
        raise ValueError("gamma paths on different grids")
    deficit = gQ.increments() - 2.0 * gH.increments()
    bad = np.where(deficit > tol)[0]
    if bad.size:
        return SlopeVerdict(False, int(bad[0]), float(deficit.max()))
    return SlopeVerdict(True, None, float(max(deficit.max(), 0.0)))


def lemma_C_constant(G: GeneratingFunction, n: int, eta: float) -> float:
    """Lower-bound constant C = 2 eta / K_n where K_n is the grid maximum
    of sum_ij |D2_ij G| over the region {min x_i >= 1/n}, d = 3.

    Grid pitch is 1/(50 n) for reproducibility.
    """
    if eta == 0:
        return 0.0
    if n < 3:
        raise ValueError("region {min x_i >= 1/n} is empty for n < 3")
    pitch = 1.0 / (50 * n)
    lo = 1.0 / n
    K = -math.inf
    x1 = np.arange(lo, 1.0 - 2 * lo + pitch / 2, pitch)
    for a in x1:
        x2 = np.arange(lo, 1.0 - a - lo + pitch / 2, pitch)
        if x2.size == 0:
            continue
        pts = np.column_stack([np.full_like(x2, a), x2, 1.0 - a - x2])
        pts = pts[pts[:, 2] >= lo - 1e-12]
        if pts.shape[0] == 0:
            continue
        H = G.hess_many(pts)
        K = max(K, float(np.abs(H).sum(axis=(1, 2)).max()))
    if not math.isfinite(K) or K <= 0:
        raise ValueError("could not bound the Hessian on the region")
    return 2.0 * eta / K


def gamma_to_csv(g: GammaPath, path):
    data = np.column_stack([g.grid.times(), g.values])
    np.savetxt(path, data, delimiter=",", header="t,value", comments="",
               fmt="%.17g")


def alpha_to_csv(a: AlphaPath, path):
    t = a.grid.times()[:-1]
    lam = eigvals_sym3_many(a.alphas) if a.alphas.shape[1] == 3 else \
        np.sort(np.linalg.eigvalsh(a.alphas), axis=1)
    d = a.alphas.shape[1]
    cols = [t] + [a.alphas[:, i, j] for i in range(d) for j in range(d)] \
        + [lam[:, k] for k in range(lam.shape[1])]
    header = "t," + ",".join(f"a{i + 1}{j + 1}" for i in range(d)
                             for j in range(d)) \
        + "," + ",".join(f"lambda{k + 1}" for k in range(lam.shape[1]))
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
               comments="", fmt="%.17g")
