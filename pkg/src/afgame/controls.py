"""Feedback gain schedules: full-information equilibrium, prior-averaged
implementable controls, player A's proxy for B, and the true/proxy
sensitivity coefficient paths.

A :class:`CoefficientEngine` co-integrates every quadrature-node
coefficient system in one vectorized backward pass and stores the
averaged paths on a refined table grid (2 * N * refine intervals), so
that downstream RK4 solves can read exact-order stage values instead of
interpolating.  The public operations are thin views of those tables on
the shared N-grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (GameParams, QuadratureRule, TruncGaussPrior,
                    prior_weights, score_mu, score_rho)
from .riccati import DEFAULT_REFINE, TimeGrid, solve_batch

__all__ = [
    "GainRow",
    "GainPath",
    "AveragedCoefficients",
    "SensitivityCoefficients",
    "CoefficientEngine",
    "ne_gains",
    "averaged_coefficients",
    "true_sensitivity_coefficients",
    "proxy_sensitivity_coefficients",
    "pair_gains",
]


@dataclass(frozen=True)
class GainRow:
    """One player's linear state-feedback row on the refined table grid."""

    table: np.ndarray  # (M+1, 2)
    label: str
    grid: TimeGrid
    refine: int

    @property
    def nodes(self) -> np.ndarray:
        """Row values at the N-grid nodes, shape (N+1, 2)."""
        return self.table[:: 2 * self.refine]

    def midpoints(self) -> np.ndarray:
        """Row values at the N-grid interval midpoints, shape (N, 2)."""
        return self.table[self.refine :: 2 * self.refine]


@dataclass(frozen=True)
class GainPath:
    """Linear drift matrix path K(t): dX = K(t) X dt + Sigma dW."""

    table: np.ndarray  # (M+1, 2, 2)
    labels: tuple[str, str]
    grid: TimeGrid
    refine: int

    @property
    def K(self) -> np.ndarray:
        """Drift matrices at the N-grid nodes, shape (N+1, 2, 2)."""
        return self.table[:: 2 * self.refine]


@dataclass(frozen=True)
class AveragedCoefficients:
    """Prior-averaged coefficient paths at the N-grid nodes.

    thetaAbar  : E over B-prior of theta^A(t; mA, .)      (A's own average)
    thetaBtilde: E over A-prior of theta^B(t; ., mB)      (B's actual average)
    thetaBbar  : E over B-prior of theta^B(t; mA, .)      (A's proxy for B)
    """

    thetaAbar: np.ndarray  # (N+1, 2, 2)
    thetaBtilde: np.ndarray
    thetaBbar: np.ndarray
    provenance: str
    grid: TimeGrid


@dataclass(frozen=True)
class SensitivityCoefficients:
    """Sensitivity rows a_j(t) = (d theta^B_12, d theta^B_22) for the
    hidden-parameter ordering (mB, muA, rhoA); kind is 'true' or 'proxy'."""

    a: np.ndarray  # (3, N+1, 2)
    kind: str
    grid: TimeGrid

    def __post_init__(self):
        if self.kind not in ("true", "proxy"):
            raise ValueError("kind must be 'true' or 'proxy'")
        if not np.isfinite(self.a).all():
            raise ValueError("non-finite sensitivity coefficients")


def _avg(w, comp):
    return np.einsum("q,tqij->tij", w, comp)


def _entries_12_22(path_table):
    """Stack the (1,2) and (2,2) entries of a matrix path, (..., 2)."""
    return np.stack([path_table[..., 0, 1], path_table[..., 1, 1]], axis=-1)


def _entries_11_12(path_table):
    return np.stack([path_table[..., 0, 0], path_table[..., 0, 1]], axis=-1)


class CoefficientEngine:
    """Builds and caches every averaged/sensitivity coefficient table for
    one (params, priorA, priorB, grid) configuration.

    Parameters
    ----------
    params : GameParams
    priorA : TruncGaussPrior
        B's belief over A's coupling mA.
    priorB : TruncGaussPrior
        A's belief over B's coupling mB.
    grid : TimeGrid
    n_legendre, n_hermite : int
        Node counts of the truncated-prior and standard-normal rules.
    refine : int
        RK4 sub-steps per grid interval (table resolution 2*N*refine).
    """

    def __init__(self, params: GameParams, priorA: TruncGaussPrior,
                 priorB: TruncGaussPrior, grid: TimeGrid,
                 n_legendre: int = 64, n_hermite: int = 32,
                 refine: int = DEFAULT_REFINE):
        self.params = params
        self.priorA = priorA
        self.priorB = priorB
        self.grid = grid
        self.refine = refine
        self.ruleA = QuadratureRule.for_prior(priorA, n_legendre)
        self.ruleB = QuadratureRule.for_prior(priorB, n_legendre)
        self.ruleZ = QuadratureRule.standard_normal(n_hermite)
        self._tables: dict[str, np.ndarray] = {}
        self._build()

    # -- construction ---------------------------------------------------
    def _build(self):
        p, g = self.params, self.grid
        M = 2 * g.N * self.refine
        wA = prior_weights(self.priorA, self.ruleA)
        wB = prior_weights(self.priorB, self.ruleB)
        aN, bN = self.ruleA.nodes, self.ruleB.nodes
        zN, zW = self.ruleZ.nodes, self.ruleZ.weights

        # (mA, M_B) nodes with the mB-derivative: A-side averages + proxy d/dmB
        solB = solve_batch(p, np.full_like(bN, p.mA), bN, M, refine=1, wrt="mB")
        t = self._tables
        t["thetaA_bar"] = _avg(wB, solB[:, 0])
        t["thetaB_bar"] = _avg(wB, solB[:, 1])
        t["dmB_proxy"] = _avg(wB, solB[:, 3])

        # (mA, muB + rhoB Z) Hermite nodes with the mA-derivative: proxy d/dmuA, d/drhoA
        solH = solve_batch(p, np.full_like(zN, p.mA), self.priorB.mu + self.priorB.rho * zN,
                           M, refine=1, wrt="mA")
        t["dmuA_proxy"] = _avg(zW, solH[:, 3])
        t["drhoA_proxy"] = _avg(zW * zN, solH[:, 3])

        # (M_A, mB) nodes with the mB-derivative: B-side averages + true sensitivities
        solA = solve_batch(p, aN, np.full_like(aN, p.mB), M, refine=1, wrt="mB")
        t["thetaA_tilde"] = _avg(wA, solA[:, 0])
        t["thetaB_tilde"] = _avg(wA, solA[:, 1])
        t["dmB_true"] = _avg(wA, solA[:, 3])
        t["dmuA_true"] = _avg(wA * score_mu(aN, self.priorA), solA[:, 1])
        t["drhoA_true"] = _avg(wA * score_rho(aN, self.priorA), solA[:, 1])

    # -- raw table access -----------------------------------------------
    def table(self, name: str) -> np.ndarray:
        """Full refined-grid table (2*N*refine + 1, 2, 2)."""
        return self._tables[name]

    def at_nodes(self, name: str) -> np.ndarray:
        """Table values at the N-grid nodes."""
        return self._tables[name][:: 2 * self.refine]

    # -- gain rows --------------------------------------------------------
    def row(self, which: str) -> GainRow:
        """Feedback row for one of the implementable controls.

        'A_baseline'   -(thetaAbar_11, thetaAbar_12)/rA     (A plays its average)
        'B_tilde'      -(thetaBtilde_12, thetaBtilde_22)/rB (B's actual play)
        'B_bar'        -(thetaBbar_12, thetaBbar_22)/rB     (A's model of B)
        'A_predicted'  -(thetaAtilde_11, thetaAtilde_12)/rA (B's prediction of A)
        """
        p = self.params
        if which == "A_baseline":
            tab = -_entries_11_12(self._tables["thetaA_bar"]) / p.rA
        elif which == "B_tilde":
            tab = -_entries_12_22(self._tables["thetaB_tilde"]) / p.rB
        elif which == "B_bar":
            tab = -_entries_12_22(self._tables["thetaB_bar"]) / p.rB
        elif which == "A_predicted":
            tab = -_entries_11_12(self._tables["thetaA_tilde"]) / p.rA
        else:
            raise ValueError(f"unknown row {which!r}")
        return GainRow(tab, which, self.grid, self.refine)

    # -- spec-level products ----------------------------------------------
    def averaged(self) -> AveragedCoefficients:
        sub = 2 * self.refine
        prov = (f"piA=N({self.priorA.mu},{self.priorA.rho}^2;[{self.priorA.lo},{self.priorA.hi}]) "
                f"piB=N({self.priorB.mu},{self.priorB.rho}^2;[{self.priorB.lo},{self.priorB.hi}]) "
                f"GL{self.ruleA.nodes.size}/GH{self.ruleZ.nodes.size}")
        return AveragedCoefficients(self._tables["thetaA_bar"][::sub],
                                    self._tables["thetaB_tilde"][::sub],
                                    self._tables["thetaB_bar"][::sub],
                                    prov, self.grid)

    def sensitivities(self, kind: str) -> SensitivityCoefficients:
        names = ("dmB", "dmuA", "drhoA")
        sub = 2 * self.refine
        a = np.stack([_entries_12_22(self._tables[f"{n}_{kind}"][::sub]) for n in names])
        return SensitivityCoefficients(a, kind, self.grid)

    def sensitivity_tables(self, kind: str) -> np.ndarray:
        """(3, M+1, 2) stacked (12),(22) sensitivity entries on the table grid."""
        names = ("dmB", "dmuA", "drhoA")
        return np.stack([_entries_12_22(self._tables[f"{n}_{kind}"]) for n in names])


def ne_gains(params: GameParams, mA: float, mB: float, grid: TimeGrid,
             refine: int = DEFAULT_REFINE) -> GainPath:
    """Full-information equilibrium drift matrix path for one (mA, mB)."""
    M = 2 * grid.N * refine
    sol = solve_batch(params, [mA], [mB], M, refine=1)
    rowA = -_entries_11_12(sol[:, 0, 0]) / params.rA
    rowB = -_entries_12_22(sol[:, 1, 0]) / params.rB
    return GainPath(np.stack([rowA, rowB], axis=1), ("NE_A", "NE_B"), grid, refine)


def averaged_coefficients(params: GameParams, priorA: TruncGaussPrior,
                          priorB: TruncGaussPrior, grid: TimeGrid,
                          n_legendre: int = 64) -> AveragedCoefficients:
    """Prior-averaged coefficient paths (one engine build)."""
    return CoefficientEngine(params, priorA, priorB, grid, n_legendre=n_legendre).averaged()


def true_sensitivity_coefficients(params: GameParams, mB: float,
                                  priorA: TruncGaussPrior, grid: TimeGrid,
                                  n_legendre: int = 64) -> SensitivityCoefficients:
    """Sensitivities of B's averaged coefficients to (mB, muA, rhoA)."""
    p = params if params.mB == mB else _with(params, mB=mB)
    eng = CoefficientEngine(p, priorA, TruncGaussPrior(), grid, n_legendre=n_legendre)
    return eng.sensitivities("true")


def proxy_sensitivity_coefficients(params: GameParams, mA: float,
                                   priorB: TruncGaussPrior, grid: TimeGrid,
                                   n_legendre: int = 64, n_hermite: int = 32) -> SensitivityCoefficients:
    """A's proxies for the true sensitivities, built from A's own quantities."""
    p = params if params.mA == mA else _with(params, mA=mA)
    eng = CoefficientEngine(p, TruncGaussPrior(), priorB, grid,
                            n_legendre=n_legendre, n_hermite=n_hermite)
    return eng.sensitivities("proxy")


def pair_gains(rowA: GainRow, rowB: GainRow) -> GainPath:
    """Stack a player-A row and a player-B row into a drift matrix path."""
    if rowA.grid != rowB.grid or rowA.refine != rowB.refine:
        raise ValueError("gain rows live on different grids")
    return GainPath(np.stack([rowA.table, rowB.table], axis=1),
                    (rowA.label, rowB.label), rowA.grid, rowA.refine)


def _with(params: GameParams, **kw) -> GameParams:
    fields = dict(qA=params.qA, qB=params.qB, rA=params.rA, rB=params.rB,
                  sigmaA=params.sigmaA, sigmaB=params.sigmaB,
                  mA=params.mA, mB=params.mB, T=params.T, x0=params.x0)
    fields.update(kw)
    return GameParams(**fields)
