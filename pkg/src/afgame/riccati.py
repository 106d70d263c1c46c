"""Backward integration of the coupled feedback-coefficient ODE system.

Both players' quadratic value coefficients theta^A, theta^B solve a coupled
matrix Riccati system backward from zero terminal conditions; their
parameter derivatives solve the linearized system obtained by formal
differentiation.  Everything is integrated by classical RK4 in reversed
time with internal sub-stepping (outputs are reported on the shared
uniform grid), vectorized over batches of (mA, mB) pairs so quadrature
nodes are solved in one pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GameParams

__all__ = [
    "NonFinite",
    "TimeGrid",
    "RiccatiPath",
    "SensitivityPath",
    "horizon_bound",
    "solve_riccati",
    "solve_sensitivity",
    "af_horizon_bound",
    "sample_theta_bound",
]

#: internal RK4 sub-steps per grid interval; keeps stiff runs (large
#: information weight) at ~1e-10 node error for the default N=100
DEFAULT_REFINE = 10


class NonFinite(RuntimeError):
    """A solver state stopped being finite (existence horizon exceeded)."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*T/N, k = 0..N."""

    T: float
    N: int = 100

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.T > 0.0:
            raise ValueError("T must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


@dataclass(frozen=True)
class RiccatiPath:
    """Node values of theta^A, theta^B for one (mA, mB) pair."""

    thetaA: np.ndarray  # (N+1, 2, 2)
    thetaB: np.ndarray
    mA: float
    mB: float
    grid: TimeGrid


@dataclass(frozen=True)
class SensitivityPath:
    """Node values of d(theta^A)/dp, d(theta^B)/dp for p in {mA, mB}."""

    dThetaA: np.ndarray  # (N+1, 2, 2)
    dThetaB: np.ndarray
    wrt: str
    mA: float
    mB: float
    grid: TimeGrid


def _qa(qA, mA):
    mA = np.asarray(mA, dtype=float)
    out = np.empty(mA.shape + (2, 2))
    out[..., 0, 0] = qA
    out[..., 0, 1] = -qA * mA
    out[..., 1, 0] = -qA * mA
    out[..., 1, 1] = qA * mA * mA
    return out


def _qb(qB, mB):
    mB = np.asarray(mB, dtype=float)
    out = np.empty(mB.shape + (2, 2))
    out[..., 0, 0] = qB * mB * mB
    out[..., 0, 1] = -qB * mB
    out[..., 1, 0] = -qB * mB
    out[..., 1, 1] = qB
    return out


def _dqa_dma(qA, mA):
    mA = np.asarray(mA, dtype=float)
    out = np.empty(mA.shape + (2, 2))
    out[..., 0, 0] = 0.0
    out[..., 0, 1] = -qA
    out[..., 1, 0] = -qA
    out[..., 1, 1] = 2.0 * qA * mA
    return out


def _dqb_dmb(qB, mB):
    mB = np.asarray(mB, dtype=float)
    out = np.empty(mB.shape + (2, 2))
    out[..., 0, 0] = 2.0 * qB * mB
    out[..., 0, 1] = -qB
    out[..., 1, 0] = -qB
    out[..., 1, 1] = 0.0
    return out


def _sym(y):
    return 0.5 * (y + np.swapaxes(y, -1, -2))


def solve_batch(
    params: GameParams,
    mA,
    mB,
    n_intervals: int,
    refine: int = DEFAULT_REFINE,
    wrt: str | None = None,
) -> np.ndarray:
    """Integrate theta (and optionally its wrt-derivative) backward.

    Returns an array of shape (n_intervals+1, C, K, 2, 2) indexed by the
    t-node (t_N = T holds the zero terminal values), with components
    C = (thetaA, thetaB) or (thetaA, thetaB, dThetaA, dThetaB) and K the
    batch of (mA, mB) pairs.  `refine` sub-steps are taken per stored
    interval.  Raises NonFinite on blow-up.
    """
    mA = np.atleast_1d(np.asarray(mA, dtype=float))
    mB = np.atleast_1d(np.asarray(mB, dtype=float))
    mA, mB = np.broadcast_arrays(mA, mB)
    K = mA.shape[0]
    QA = _qa(params.qA, mA)
    QB = _qb(params.qB, mB)
    RA = np.diag([1.0 / params.rA, 0.0])
    RB = np.diag([0.0, 1.0 / params.rB])
    if wrt is None:
        ncomp = 2
    elif wrt == "mA":
        ncomp = 4
        dQA, dQB = _dqa_dma(params.qA, mA), np.zeros((K, 2, 2))
    elif wrt == "mB":
        ncomp = 4
        dQA, dQB = np.zeros((K, 2, 2)), _dqb_dmb(params.qB, mB)
    else:
        raise ValueError("wrt must be None, 'mA' or 'mB'")

    def rhs(y):
        a, b = y[0], y[1]
        out = np.empty_like(y)
        aRA = a @ RA
        bRB = b @ RB
        out[0] = aRA @ a + a @ (RB @ b) + bRB @ a - QA
        out[1] = bRB @ b + aRA @ b + b @ (RA @ a) - QB
        if ncomp == 4:
            sa, sb = y[2], y[3]
            out[2] = (sa @ RA @ a + a @ (RA @ sa) + sa @ (RB @ b)
                      + a @ (RB @ sb) + sb @ (RB @ a) + bRB @ sa - dQA)
            out[3] = (sb @ RB @ b + bRB @ sb + sa @ (RA @ b)
                      + aRA @ sb + sb @ (RA @ a) + b @ (RA @ sa) - dQB)
        return out

    h = params.T / (n_intervals * refine)
    y = np.zeros((ncomp, K, 2, 2))
    store = np.zeros((n_intervals + 1, ncomp, K, 2, 2))
    # reversed time: d/dtau theta(T - tau) = -rhs(theta)
    for j in range(n_intervals, 0, -1):
        for _ in range(refine):
            k1 = rhs(y)
            k2 = rhs(y - 0.5 * h * k1)
            k3 = rhs(y - 0.5 * h * k2)
            k4 = rhs(y - h * k3)
            y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            y = _sym(y)
        if not np.isfinite(y).all():
            raise NonFinite(
                f"coefficient solve diverged between t_{j} and t_{j - 1} "
                f"(horizon T={params.T} likely past the existence bound)")
        store[j - 1] = y
    return store


def solve_riccati(params: GameParams, mA: float, mB: float, grid: TimeGrid,
                  refine: int = DEFAULT_REFINE) -> RiccatiPath:
    """Solve the coupled system for one parameter pair on the grid."""
    out = solve_batch(params, [mA], [mB], grid.N, refine=refine)
    return RiccatiPath(out[:, 0, 0], out[:, 1, 0], float(mA), float(mB), grid)


def solve_sensitivity(params: GameParams, mA: float, mB: float, grid: TimeGrid,
                      wrt: str, base: RiccatiPath | None = None,
                      refine: int = DEFAULT_REFINE) -> SensitivityPath:
    """Solve the linearized system for d(theta)/d(wrt), wrt in {mA, mB}.

    The augmented (theta, dtheta) system is integrated jointly so the
    result is the exact derivative of the discrete solver map; a `base`
    path, when given, is only validated against (grid, mA, mB).
    """
    if base is not None:
        if base.grid != grid or base.mA != mA or base.mB != mB:
            raise ValueError("base path was solved on different grid/parameters")
    out = solve_batch(params, [mA], [mB], grid.N, refine=refine, wrt=wrt)
    return SensitivityPath(out[:, 2, 0], out[:, 3, 0], wrt, float(mA), float(mB), grid)


def horizon_bound(mA: float, mB: float, params: GameParams) -> float:
    """Sufficient existence horizon for the coupled theta system.

    (c1*c2)^(-1/2) * arctan((1 + mA^2 + mB^2) * (c2/c1)^(-1/2)) with
    c1 = 5*sqrt(rA^-2 + rB^-2) and c2 = sqrt(qA^2+qB^2)*(1+mA^2+mB^2);
    any solution on [0, T] with T below this satisfies
    ||diag(theta^A, theta^B)||_F <= 1 + mA^2 + mB^2.
    """
    c1 = 5.0 * math.sqrt(params.rA**-2 + params.rB**-2)
    s = 1.0 + mA * mA + mB * mB
    c2 = math.hypot(params.qA, params.qB) * s
    return (c1 * c2) ** -0.5 * math.atan(s * (c2 / c1) ** -0.5)


def af_horizon_bound(params: GameParams, qAF: float, rAF: float, lamAF: float,
                     cTheta: float, cG: float,
                     mBounds: tuple[float, float, float, float] = (-5.0, 5.0, -5.0, 5.0)) -> float:
    """Sufficient existence horizon for the saddle-point coefficient ODE.

    min{ horizon_bound(cA, cB), pi / (2*sqrt((d1 + 1/2)*(d2^2/2 + d3))) }
    with cA, cB the largest prior-support magnitudes and
    d1 = 1/((qAF+rAF)*rA),
    d2 = 2*qAF*cTheta/((qAF+rAF)*rA^2) + 2*cTheta/rB,
    d3 = qAF*rAF*cTheta^2/((qAF+rAF)*rA^3) + lamAF*cG^2/sigmaB^2.
    cTheta and cG are sampled upper bounds (see sample_theta_bound).
    """
    loA, hiA, loB, hiB = mBounds
    cA = max(abs(loA), abs(hiA))
    cB = max(abs(loB), abs(hiB))
    s = qAF + rAF
    d1 = 1.0 / (s * params.rA)
    d2 = 2.0 * qAF * cTheta / (s * params.rA**2) + 2.0 * cTheta / params.rB
    d3 = qAF * rAF * cTheta**2 / (s * params.rA**3) + lamAF * cG**2 / params.sigmaB**2
    prod = (d1 + 0.5) * (0.5 * d2 * d2 + d3)
    second = math.inf if prod == 0.0 else math.pi / (2.0 * math.sqrt(prod))
    return min(horizon_bound(cA, cB, params), second)


def sample_theta_bound(params: GameParams,
                       mBounds: tuple[float, float, float, float] = (-5.0, 5.0, -5.0, 5.0),
                       n: int = 5, N: int = 50) -> float:
    """Max Frobenius norm of theta^A, theta^B over an n*n grid of (mA, mB)
    in mBounds, each solved up to its shared sufficient horizon."""
    loA, hiA, loB, hiB = mBounds
    cA = max(abs(loA), abs(hiA))
    cB = max(abs(loB), abs(hiB))
    horizon = horizon_bound(cA, cB, params)
    p = GameParams(qA=params.qA, qB=params.qB, rA=params.rA, rB=params.rB,
                   sigmaA=params.sigmaA, sigmaB=params.sigmaB,
                   mA=params.mA, mB=params.mB, T=horizon, x0=params.x0)
    mAs, mBs = np.meshgrid(np.linspace(loA, hiA, n), np.linspace(loB, hiB, n))
    out = solve_batch(p, mAs.ravel(), mBs.ravel(), N, refine=1)
    norms = np.sqrt(np.sum(np.square(out), axis=(-1, -2)))
    return float(norms.max())
