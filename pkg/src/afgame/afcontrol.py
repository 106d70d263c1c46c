"""Saddle-point control for the information-seeking player.

For a fixed auxiliary vector z the inner minimization is an LQ problem
whose quadratic coefficient theta^AF solves a backward matrix ODE driven
by the averaged baseline coefficients and a rank-one information source
built from the proxy sensitivity rows; the outer loop ascends z by
finite-difference gradients of the deterministic (moment-ODE) objective.

The information source enters the backward equation with positive sign
(it is a running reward) and weight info_weight * lamAF / sigmaB^2; see
README for the calibration of info_weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controls import CoefficientEngine, GainRow, SensitivityCoefficients, pair_gains
from .fisher import (FisherMatrix, fisher_entries_from_moments, fisher_mc,
                     moment_batch, variational_value)
from .riccati import NonFinite, TimeGrid
from .simulate import SimConfig, euler_maruyama, pathwise_quadratic

__all__ = [
    "AFConfig",
    "AFSolution",
    "g_vector",
    "solve_theta_af",
    "af_gains",
    "eval_JAF",
    "optimize",
    "grid_search",
]


@dataclass(frozen=True)
class AFConfig:
    """Saddle-point problem weights and outer-loop settings.

    info_weight is the dimensionless fraction of the nominal information
    weight lamAF/sigmaB^2 applied in the backward equation; the nominal
    weight (info_weight=1) puts the default horizon outside the existence
    bound of the inner problem.
    """

    qAF: float = 5.0
    rAF: float = 1.0
    lamAF: float = 2.5
    z0: tuple[float, float] = (0.0, 0.0)
    alpha: float = 0.05
    eps: float = 1e-4
    maxIter: int = 200
    info_weight: float = 0.64

    def __post_init__(self):
        if self.qAF < 0 or not self.rAF > 0:
            raise ValueError("qAF must be nonnegative and rAF positive")
        if self.lamAF < 0:
            raise ValueError("lamAF must be nonnegative")
        if not (self.alpha > 0 and self.eps > 0):
            raise ValueError("alpha and eps must be positive")
        if self.maxIter < 1:
            raise ValueError("maxIter must be >= 1")
        object.__setattr__(self, "z0", tuple(float(v) for v in self.z0))


@dataclass
class AFSolution:
    """Result of the outer optimization."""

    zStar: np.ndarray
    thetaAF: np.ndarray           # (N+1, 2, 2) node values at zStar
    gPath: np.ndarray             # (N+1, 2) information rows at zStar
    afGains: GainRow              # feedback row of the saddle control
    history: list                 # (z, J, grad_norm) per outer iteration
    converged: bool
    grid: TimeGrid


def g_vector(z, proxy_sens: SensitivityCoefficients, rB: float, k: int) -> tuple[float, float]:
    """Information rows (g12, g22) at grid node k:
    (z1 * d_muA + z2 * d_rhoA + d_mB) entries scaled by 1/rB."""
    if proxy_sens.kind != "proxy":
        raise ValueError("g_vector expects proxy sensitivities")
    z = np.asarray(z, dtype=float)
    a = proxy_sens.a[:, k, :]  # (3, 2) rows (mB, muA, rhoA)
    g = (a[0] + z[0] * a[1] + z[1] * a[2]) / rB
    return float(g[0]), float(g[1])


def _g_tables(Z: np.ndarray, sens_tables: np.ndarray, rB: float) -> np.ndarray:
    """(B, M+1, 2) information rows on the table grid for a z batch."""
    return (sens_tables[0][None]
            + Z[:, 0, None, None] * sens_tables[1][None]
            + Z[:, 1, None, None] * sens_tables[2][None]) / rB


def solve_theta_af_batch(Z: np.ndarray, engine: CoefficientEngine, cfg: AFConfig,
                         allow_nonfinite: bool = False):
    """Backward RK4 of the saddle coefficient ODE for a batch of z vectors.

    Returns (nodes, row_table): node values (B, N+1, 2, 2) on the shared
    grid and the (theta11, theta12) row (B, M+1, 2) on the refined table
    grid (odd table indices are filled by interpolation; every RK4 stage
    consumed downstream reads even indices, which are exact).
    """
    p, grid, refine = engine.params, engine.grid, engine.refine
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    B = Z.shape[0]
    s = cfg.qAF + cfg.rAF
    w_info = cfg.info_weight * cfg.lamAF / p.sigmaB**2
    c_quad = 1.0 / s
    c_crossA = cfg.qAF / (s * p.rA)
    c_src = cfg.qAF * cfg.rAF / (s * p.rA**2)
    A_tab = engine.table("thetaA_bar")
    B_tab = engine.table("thetaB_bar")
    g_tab = _g_tables(Z, engine.sensitivity_tables("proxy"), p.rB)

    def rhs(th, i):
        A0 = A_tab[i, 0]      # first row of the symmetric averaged matrix
        B1 = B_tab[i, 1]      # second row
        g = g_tab[:, i, :]    # (B, 2)
        c = th[:, :, 0]       # theta e1 (first column; symmetric)
        d = th[:, :, 1]
        m1 = np.einsum("bi,j->bij", c, A0)
        m2 = np.einsum("bi,j->bij", d, B1) / p.rB
        out = (c_quad * np.einsum("bi,bj->bij", c, c)
               + c_crossA * (m1 + m1.transpose(0, 2, 1))
               + (m2 + m2.transpose(0, 2, 1))
               - c_src * np.einsum("i,j->ij", A0, A0)[None]
               + w_info * np.einsum("bi,bj->bij", g, g))
        return out

    n_int = grid.N * refine
    h = p.T / n_int
    th = np.zeros((B, 2, 2))
    nodes = np.zeros((B, grid.N + 1, 2, 2))
    row_even = np.zeros((B, n_int + 1, 2))
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n_int, 0, -1):
            i2 = 2 * j
            k1 = rhs(th, i2)
            k2 = rhs(th - 0.5 * h * k1, i2 - 1)
            k3 = rhs(th - 0.5 * h * k2, i2 - 1)
            k4 = rhs(th - h * k3, i2 - 2)
            th = th - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            th = 0.5 * (th + th.transpose(0, 2, 1))
            row_even[:, j - 1, :] = th[:, 0, :2]
            if (j - 1) % refine == 0:
                nodes[:, (j - 1) // refine] = th
    if not allow_nonfinite and not np.isfinite(nodes).all():
        raise NonFinite("saddle coefficient solve diverged "
                        "(information weight past the existence horizon)")
    # dense table: even indices exact, odd filled by neighbor interpolation
    M = 2 * n_int
    row_tab = np.empty((B, M + 1, 2))
    row_tab[:, ::2, :] = row_even
    row_tab[:, 1::2, :] = 0.5 * (row_even[:, :-1, :] + row_even[:, 1:, :])
    return nodes, row_tab


def solve_theta_af(z, engine: CoefficientEngine, cfg: AFConfig) -> np.ndarray:
    """Node values (N+1, 2, 2) of the saddle coefficient path at one z."""
    nodes, _ = solve_theta_af_batch(np.asarray(z, dtype=float)[None], engine, cfg)
    return nodes[0]


def _af_row_tables(row_tabs: np.ndarray, engine: CoefficientEngine, cfg: AFConfig) -> np.ndarray:
    """v* feedback rows (B, M+1, 2) from theta^AF row tables."""
    p = engine.params
    s = cfg.qAF + cfg.rAF
    A_row = np.stack([engine.table("thetaA_bar")[:, 0, 0],
                      engine.table("thetaA_bar")[:, 0, 1]], axis=-1)
    return -(cfg.qAF / (s * p.rA)) * A_row[None] - row_tabs / s


def af_gains(thetaAF_row_table: np.ndarray, engine: CoefficientEngine,
             cfg: AFConfig) -> GainRow:
    """Feedback row of the saddle control v* on the table grid."""
    tab = _af_row_tables(thetaAF_row_table[None], engine, cfg)[0]
    return GainRow(tab, "A_af", engine.grid, engine.refine)


def _eval_batch(Z: np.ndarray, engine: CoefficientEngine, cfg: AFConfig,
                allow_nonfinite: bool = False):
    """Objective values (B,) for a z batch, deterministic moment route.

    J(z) = qAF E int (v-u_base)^2 + rAF E int v^2 - lamAF * varval(Ibar, z)
    with the proxy information matrix evaluated under the model pairing
    (v*, A's proxy of B).
    """
    p, grid = engine.params, engine.grid
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    nodes, row_tabs = solve_theta_af_batch(Z, engine, cfg, allow_nonfinite)
    v_rows = _af_row_tables(row_tabs, engine, cfg)            # (B, M+1, 2)
    bbar = engine.row("B_bar").table                           # (M+1, 2)
    K = np.stack([v_rows, np.broadcast_to(bbar, v_rows.shape)], axis=2)  # (B, M+1, 2, 2)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            P = moment_batch(K, p, p.x0, grid, engine.refine)  # (B, N+1, 2, 2)
        except NonFinite:
            if not allow_nonfinite:
                raise
            # recompute leniently: NaNs flow through
            P = _moment_batch_lenient(K, p, grid, engine.refine)
        a = engine.sensitivities("proxy").a
        Ibar = fisher_entries_from_moments(a, P, p, grid)      # (B, 3, 3)
        w = np.full(grid.N + 1, grid.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        sub = 2 * engine.refine
        v_nodes = v_rows[:, ::sub, :]
        dev = v_nodes - engine.row("A_baseline").nodes[None]
        cost = (cfg.qAF * np.einsum("t,bti,btij,btj->b", w, dev, P, dev, optimize=True)
                + cfg.rAF * np.einsum("t,bti,btij,btj->b", w, v_nodes, P, v_nodes, optimize=True))
        varval = (Ibar[:, 0, 0] + 2.0 * np.einsum("bi,bi->b", Z, Ibar[:, 1:, 0])
                  + np.einsum("bi,bij,bj->b", Z, Ibar[:, 1:, 1:], Z))
    return cost - cfg.lamAF * varval, nodes, row_tabs, Ibar


def _moment_batch_lenient(K, params, grid, refine):
    out = np.full(K.shape[:-3] + (grid.N + 1, 2, 2), np.nan)
    for b in range(K.shape[0]):
        try:
            out[b] = moment_batch(K[b], params, params.x0, grid, refine)
        except NonFinite:
            pass
    return out


def eval_JAF(z, engine: CoefficientEngine, cfg: AFConfig, mode: str = "moments",
             sim: SimConfig | None = None, gain_row: GainRow | None = None,
             moment_method: str = "rk4") -> float:
    """Proxy objective at one z.

    mode='moments' evaluates expectations by the moment ODE ('rk4'
    continuous or 'euler' exact-chain moments); mode='mc' simulates a
    batch under the candidate control paired with A's proxy of B (common
    random numbers via sim.seed).  A custom candidate row may be supplied
    via gain_row; by default the inner minimizer at z is used.
    """
    p, grid = engine.params, engine.grid
    z = np.asarray(z, dtype=float)
    if mode == "moments" and gain_row is None and moment_method == "rk4":
        J, _, _, _ = _eval_batch(z[None], engine, cfg)
        return float(J[0])
    if gain_row is None:
        _, row_tab = solve_theta_af_batch(z[None], engine, cfg)
        gain_row = GainRow(_af_row_tables(row_tab, engine, cfg)[0], "A_af",
                           grid, engine.refine)
    gains = pair_gains(gain_row, engine.row("B_bar"))
    base = engine.row("A_baseline").nodes
    vn = gain_row.nodes
    dev = vn - base
    C = (cfg.qAF * np.einsum("ti,tj->tij", dev, dev)
         + cfg.rAF * np.einsum("ti,tj->tij", vn, vn))
    if mode == "moments":
        P = moment_batch(gains.table[None], p, p.x0, grid, engine.refine,
                         method=moment_method)[0]
        w = np.full(grid.N + 1, grid.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        cost = float(np.einsum("t,tij,tij->", w, C, P))
        Ibar = FisherMatrix(fisher_entries_from_moments(
            engine.sensitivities("proxy").a, P[None], p, grid)[0], "proxy", "moments")
    elif mode == "mc":
        if sim is None:
            raise ValueError("mc mode needs a SimConfig")
        batch = euler_maruyama(gains, p, sim)
        cost, _, _ = pathwise_quadratic(batch, C, grid)
        Ibar = fisher_mc(engine.sensitivities("proxy"), batch, p, grid)
    else:
        raise ValueError("mode must be 'moments' or 'mc'")
    return float(cost - cfg.lamAF * variational_value(Ibar, z))


def optimize(engine: CoefficientEngine, cfg: AFConfig, fd_step: float = 1e-4) -> AFSolution:
    """Alternate exact inner solves with one gradient-ascent step in z.

    Per outer iteration the objective and its central finite-difference
    gradient are evaluated in a single batched inner solve (center plus
    four probes, each with a fresh coefficient solve); terminates when the
    objective moves by at most cfg.eps between consecutive iterations or
    at cfg.maxIter (converged=False).
    """
    grid = engine.grid
    z = np.asarray(cfg.z0, dtype=float)
    probes = np.array([[0.0, 0.0],
                       [fd_step, 0.0], [-fd_step, 0.0],
                       [0.0, fd_step], [0.0, -fd_step]])
    history: list[tuple[np.ndarray, float, float]] = []
    prev = None
    converged = False
    for _ in range(cfg.maxIter):
        J5, _, _, _ = _eval_batch(z[None] + probes, engine, cfg)
        J = float(J5[0])
        grad = np.array([(J5[1] - J5[2]) / (2 * fd_step),
                         (J5[3] - J5[4]) / (2 * fd_step)])
        history.append((z.copy(), J, float(np.linalg.norm(grad))))
        if prev is not None and abs(J - prev) <= cfg.eps:
            converged = True
            break
        prev = J
        z = z + cfg.alpha * grad
    nodes, row_tab = solve_theta_af_batch(z[None], engine, cfg)
    g_nodes = _g_tables(z[None], engine.sensitivity_tables("proxy"),
                        engine.params.rB)[0, :: 2 * engine.refine, :]
    row = GainRow(_af_row_tables(row_tab, engine, cfg)[0], "A_af", grid, engine.refine)
    return AFSolution(z, nodes[0], g_nodes, row, history, converged, grid)


def grid_search(engine: CoefficientEngine, cfg: AFConfig, lo: float = -2.0,
                hi: float = 2.0, n: int = 41):
    """Dense argmax of the deterministic objective over [lo,hi]^2.

    Returns (z_best, Z, J) where Z is the (n*n, 2) grid and J the matching
    objective values (NaN where the inner solve diverges)."""
    ax = np.linspace(lo, hi, n)
    Z = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    J, _, _, _ = _eval_batch(Z, engine, cfg, allow_nonfinite=True)
    best = int(np.nanargmax(J))
    return Z[best].copy(), Z, J
