"""Fisher information of the hidden-parameter triple (mB, muA, rhoA).

The information matrix is assembled from sensitivity rows a_j(t) and the
state second moment: entry (j,k) is the time integral of
a_j(t)' E[X X'] a_k(t) scaled by 1/(sigmaB^2 rB^2).  Two routes are
provided: a deterministic moment ODE and a Monte Carlo estimate over a
trajectory batch; their agreement is the package's central cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controls import GainPath, SensitivityCoefficients
from .model import GameParams
from .riccati import NonFinite, TimeGrid

__all__ = [
    "SingularBlock",
    "MomentPath",
    "FisherMatrix",
    "moment_path",
    "fisher_from_moments",
    "fisher_mc",
    "asymptotic_variance",
    "asymptotic_variance_se",
    "variational_value",
]

_UPPER = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


class SingularBlock(RuntimeError):
    """The (muA, rhoA) information block is numerically singular."""


@dataclass(frozen=True)
class MomentPath:
    """First and second moments of the state at the grid nodes."""

    mean: np.ndarray    # (N+1, 2)
    second: np.ndarray  # (N+1, 2, 2)
    grid: TimeGrid
    method: str


@dataclass(frozen=True)
class FisherMatrix:
    """Symmetric 3x3 information matrix in (mB, muA, rhoA) ordering.

    se holds entrywise Monte Carlo standard errors (None for the moment
    route); entry_cov the 6x6 covariance of the upper-triangle estimates
    in the order (00, 01, 02, 11, 12, 22), used for delta-method errors.
    """

    entries: np.ndarray
    kind: str
    dynamics: str
    se: np.ndarray | None = None
    entry_cov: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (3, 3) or not np.allclose(e, e.T, atol=1e-9):
            raise ValueError("entries must be a symmetric 3x3 matrix")


def _trapezoid_weights(grid: TimeGrid) -> np.ndarray:
    w = np.full(grid.N + 1, grid.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def moment_batch(tables: np.ndarray, params: GameParams, x0, grid: TimeGrid,
                 refine: int, method: str = "rk4") -> np.ndarray:
    """Second-moment paths for a batch of drift tables.

    tables : (..., M+1, 2, 2) drift matrices on the refined table grid
    returns (..., N+1, 2, 2); 'rk4' integrates the continuous moment ODE
    with exact-order stage values, 'euler' applies the exact second-moment
    recursion of the Euler-Maruyama chain (left-endpoint drift).
    """
    x0 = np.asarray(x0, dtype=float)
    Sig2 = np.diag([params.sigmaA**2, params.sigmaB**2])
    N, dt = grid.N, grid.dt
    P = np.broadcast_to(np.outer(x0, x0), tables.shape[:-3] + (2, 2)).copy()
    out = np.empty(tables.shape[:-3] + (N + 1, 2, 2))
    out[..., 0, :, :] = P
    sub = 2 * refine
    if method == "euler":
        eye = np.eye(2)
        for k in range(N):
            A = eye + tables[..., sub * k, :, :] * dt
            P = A @ P @ np.swapaxes(A, -1, -2) + Sig2 * dt
            out[..., k + 1, :, :] = P
    elif method == "rk4":
        def f(PP, Kt):
            KP = Kt @ PP
            return KP + np.swapaxes(KP, -1, -2) + Sig2
        for k in range(N):
            KL = tables[..., sub * k, :, :]
            KM = tables[..., sub * k + refine, :, :]
            KR = tables[..., sub * (k + 1), :, :]
            k1 = f(P, KL)
            k2 = f(P + 0.5 * dt * k1, KM)
            k3 = f(P + 0.5 * dt * k2, KM)
            k4 = f(P + dt * k3, KR)
            P = P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            P = 0.5 * (P + np.swapaxes(P, -1, -2))
            out[..., k + 1, :, :] = P
    else:
        raise ValueError("method must be 'rk4' or 'euler'")
    if not np.isfinite(out).all():
        raise NonFinite("moment propagation overflowed")
    return out


def _mean_batch(tables, x0, grid: TimeGrid, refine: int, method: str) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    N, dt = grid.N, grid.dt
    m = np.broadcast_to(x0, tables.shape[:-3] + (2,)).copy()
    out = np.empty(tables.shape[:-3] + (N + 1, 2))
    out[..., 0, :] = m
    sub = 2 * refine
    for k in range(N):
        if method == "euler":
            m = m + (tables[..., sub * k, :, :] @ m[..., None])[..., 0] * dt
        else:
            KL = tables[..., sub * k, :, :]
            KM = tables[..., sub * k + refine, :, :]
            KR = tables[..., sub * (k + 1), :, :]
            k1 = (KL @ m[..., None])[..., 0]
            k2 = (KM @ (m + 0.5 * dt * k1)[..., None])[..., 0]
            k3 = (KM @ (m + 0.5 * dt * k2)[..., None])[..., 0]
            k4 = (KR @ (m + dt * k3)[..., None])[..., 0]
            m = m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[..., k + 1, :] = m
    return out


def moment_path(gains: GainPath, params: GameParams, x0, grid: TimeGrid,
                method: str = "rk4") -> MomentPath:
    """Propagate E[X] and E[X X'] under linear feedback from a point mass at x0."""
    if gains.grid != grid:
        raise ValueError("gains and grid mismatch")
    second = moment_batch(gains.table, params, x0, grid, gains.refine, method)
    mean = _mean_batch(gains.table, x0, grid, gains.refine, method)
    return MomentPath(mean, second, grid, method)


def fisher_entries_from_moments(a: np.ndarray, second: np.ndarray,
                                params: GameParams, grid: TimeGrid) -> np.ndarray:
    """Batched information entries: a (3, N+1, 2), second (..., N+1, 2, 2),
    giving (..., 3, 3)."""
    w = _trapezoid_weights(grid)
    scale = 1.0 / (params.sigmaB**2 * params.rB**2)
    return scale * np.einsum("t,jti,...tik,ltk->...jl", w, a, second, a,
                             optimize=True)


def fisher_from_moments(sens: SensitivityCoefficients, moments: MomentPath,
                        params: GameParams, grid: TimeGrid) -> FisherMatrix:
    """Deterministic information matrix from the second-moment path."""
    if sens.grid != grid or moments.grid != grid:
        raise ValueError("sensitivities/moments not on the requested grid")
    w = _trapezoid_weights(grid)
    scale = 1.0 / (params.sigmaB**2 * params.rB**2)
    F = scale * np.einsum("t,jti,tik,ltk->jl", w, sens.a, moments.second, sens.a,
                          optimize=True)
    F = 0.5 * (F + F.T)
    return FisherMatrix(F, sens.kind, f"moments[{moments.method}]")


def fisher_mc(sens: SensitivityCoefficients, batch, params: GameParams,
              grid: TimeGrid) -> FisherMatrix:
    """Monte Carlo information matrix from a trajectory batch.

    Per path, each entry is the trapezoidal integral of
    (a_j . X_t)(a_k . X_t); entries are averaged over paths with a fixed
    reduction order, and entrywise standard errors plus the 6x6 covariance
    of the upper-triangle estimates are attached.
    """
    states = batch.states
    if states.shape[0] == 0:
        raise ValueError("empty trajectory batch")
    if states.shape[1] != grid.N + 1:
        raise ValueError("batch and grid disagree on the step count")
    w = _trapezoid_weights(grid)
    scale = 1.0 / (params.sigmaB**2 * params.rB**2)
    nP = states.shape[0]
    # signals y_j[p, t] = a_j(t) . X_t
    y = np.einsum("jti,pti->jpt", sens.a, states, optimize=True)
    vals = np.empty((6, nP))
    for i, (j, k) in enumerate(_UPPER):
        vals[i] = scale * ((y[j] * y[k]) @ w)
    means = vals.mean(axis=1)
    cov6 = np.cov(vals, ddof=1) / nP
    F = np.zeros((3, 3))
    S = np.zeros((3, 3))
    for i, (j, k) in enumerate(_UPPER):
        F[j, k] = F[k, j] = means[i]
        S[j, k] = S[k, j] = np.sqrt(cov6[i, i])
    return FisherMatrix(F, sens.kind, f"mc[n={nP},seed={batch.seed}]",
                        se=S, entry_cov=cov6)


def _schur(F: np.ndarray, cond_limit: float, ridge: float | None):
    blk = F[1:, 1:].copy()
    if ridge is not None:
        blk += ridge * np.eye(2)
    if np.linalg.cond(blk) > cond_limit:
        raise SingularBlock(
            f"(muA,rhoA) block condition number {np.linalg.cond(blk):.3g} "
            f"exceeds {cond_limit:.3g}; pass an explicit ridge to proceed")
    sol = np.linalg.solve(blk, F[1:, 0])
    return F[0, 0] - F[0, 1:] @ sol, sol, blk


def asymptotic_variance(F: FisherMatrix, cond_limit: float = 1e12,
                        ridge: float | None = None) -> float:
    """[F^-1]_(mB,mB) via the Schur complement of the (muA, rhoA) block.

    Raises SingularBlock when the block's condition number exceeds
    cond_limit; a ridge (added to the block diagonal) must be requested
    explicitly, never applied silently.
    """
    s, _, _ = _schur(np.asarray(F.entries, dtype=float), cond_limit, ridge)
    if s <= 0:
        raise SingularBlock("nonpositive Schur complement")
    return 1.0 / s


def asymptotic_variance_se(F: FisherMatrix, cond_limit: float = 1e12,
                           ridge: float | None = None) -> float:
    """Delta-method standard error of asymptotic_variance for a Monte Carlo
    information matrix (requires entry_cov)."""
    if F.entry_cov is None:
        raise ValueError("information matrix carries no entry covariance")
    E = np.asarray(F.entries, dtype=float)
    s, sol, blk = _schur(E, cond_limit, ridge)
    # dS/d(entry) over the upper triangle (00, 01, 02, 11, 12, 22)
    g = np.empty(6)
    g[0] = 1.0
    g[1] = -2.0 * sol[0]
    g[2] = -2.0 * sol[1]
    outer = np.outer(sol, sol)
    g[3] = outer[0, 0]
    g[4] = 2.0 * outer[0, 1]
    g[5] = outer[1, 1]
    var_of_S = float(g @ F.entry_cov @ g)
    return np.sqrt(var_of_S) / s**2


def variational_value(F: FisherMatrix, z) -> float:
    """F_mm + 2 z.(muA,rhoA cross block) + z.(block) z (quadratic over the
    auxiliary 2-vector whose minimum is the Schur complement)."""
    z = np.asarray(z, dtype=float)
    E = np.asarray(F.entries, dtype=float)
    return float(E[0, 0] + 2.0 * z @ E[1:, 0] + z @ E[1:, 1:] @ z)
