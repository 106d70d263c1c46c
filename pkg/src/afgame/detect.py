"""Opponent-side detection of deviations from baseline play.

Player B predicts A's baseline feedback from its own prior, forms the
per-step residual between observed increments of X^A and the predicted
drift, and regresses the residual cross-sectionally on the current state.
The per-step coefficients estimate the drift-discrepancy row times dt;
their maximum magnitude over time is the detection score.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .controls import GainRow
from .riccati import TimeGrid
from .simulate import TrajectoryBatch

__all__ = [
    "DetectionReport",
    "residuals",
    "per_step_regression",
    "detection_score",
    "detection_report",
    "write_report_csv",
]


@dataclass(frozen=True)
class DetectionReport:
    """Per-step regression output plus the scalar detection score.

    alpha1/alpha2 estimate (drift row * dt); rate columns alpha/dt are
    exposed so scores can be compared across grids.  rank_deficient flags
    steps whose state Gram matrix was singular (coefficients zeroed).
    """

    t: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    se1: np.ndarray
    se2: np.ndarray
    rank_deficient: np.ndarray
    DAF: float
    target1: np.ndarray | None = None
    target2: np.ndarray | None = None
    nReps: int = 0

    @property
    def alpha1_rate(self) -> np.ndarray:
        return self.alpha1 / np.diff(self.t)[0]

    @property
    def alpha2_rate(self) -> np.ndarray:
        return self.alpha2 / np.diff(self.t)[0]


def residuals(batch: TrajectoryBatch, predicted_row: GainRow | np.ndarray,
              grid: TimeGrid) -> np.ndarray:
    """Delta-nu[p, k] = X^A[p, k+1] - X^A[p, k] - (predicted row . X[p, k]) dt."""
    row = predicted_row.nodes if isinstance(predicted_row, GainRow) else np.asarray(predicted_row)
    states = batch.states
    if states.shape[1] != grid.N + 1 or row.shape[0] != grid.N + 1:
        raise ValueError("batch, predicted row and grid disagree on the step count")
    drift = np.einsum("tk,ptk->pt", row[:-1], states[:, :-1, :], optimize=True)
    return states[:, 1:, 0] - states[:, :-1, 0] - drift * grid.dt


def per_step_regression(res: np.ndarray, batch: TrajectoryBatch, grid: TimeGrid,
                        intercept: bool = False):
    """Cross-sectional least squares of the residual on (X^A, X^B) per step.

    Returns (alpha1, alpha2, se1, se2, rank_deficient); no intercept by
    default.  Classical standard errors from the per-step residual
    variance.  A singular Gram matrix marks the step rank-deficient and
    zeroes its coefficients.
    """
    states = batch.states
    nP, nSteps = res.shape
    if nP < 3:
        raise ValueError("need at least 3 paths for the 2-regressor fit")
    ncoef = 3 if intercept else 2
    alpha = np.zeros((nSteps, 2))
    se = np.zeros((nSteps, 2))
    bad = np.zeros(nSteps, dtype=bool)
    for k in range(nSteps):
        X = states[:, k, :]
        if intercept:
            X = np.column_stack([X, np.ones(nP)])
        G = X.T @ X
        scale = np.trace(G) / G.shape[0]
        if scale <= 0 or np.linalg.cond(G) > 1e12:
            bad[k] = True
            continue
        coef = np.linalg.solve(G, X.T @ res[:, k])
        resid = res[:, k] - X @ coef
        s2 = float(resid @ resid) / (nP - ncoef)
        cov = s2 * np.linalg.inv(G)
        alpha[k] = coef[:2]
        se[k] = np.sqrt(np.diag(cov))[:2]
    return alpha[:, 0], alpha[:, 1], se[:, 0], se[:, 1], bad


def detection_score(alpha1: np.ndarray, alpha2: np.ndarray) -> float:
    """max over time of max(|alpha1|, |alpha2|)."""
    a1 = np.asarray(alpha1, dtype=float)
    a2 = np.asarray(alpha2, dtype=float)
    if a1.size == 0 or a2.size == 0:
        raise ValueError("empty coefficient arrays")
    return float(max(np.abs(a1).max(), np.abs(a2).max()))


def detection_report(batch: TrajectoryBatch, predicted_row: GainRow, grid: TimeGrid,
                     actual_row: GainRow | None = None) -> DetectionReport:
    """Full detection pipeline; analytic targets (drift-discrepancy row
    times dt) are attached when the actually-played row is supplied."""
    res = residuals(batch, predicted_row, grid)
    a1, a2, s1, s2, bad = per_step_regression(res, batch, grid)
    t1 = t2 = None
    if actual_row is not None:
        diff = (actual_row.nodes - predicted_row.nodes)[:-1] * grid.dt
        t1, t2 = diff[:, 0], diff[:, 1]
    return DetectionReport(grid.nodes[:-1], a1, a2, s1, s2, bad,
                           detection_score(a1, a2), t1, t2, batch.states.shape[0])


def write_report_csv(path, report: DetectionReport, header_comment: str | None = None):
    """CSV columns: t, alpha1, alpha2, se1, se2, target1, target2."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "alpha1", "alpha2", "se1", "se2", "target1", "target2"])
        n = report.t.size
        t1 = report.target1 if report.target1 is not None else np.full(n, np.nan)
        t2 = report.target2 if report.target2 is not None else np.full(n, np.nan)
        for k in range(n):
            writer.writerow([format(v, ".17g") for v in
                             (report.t[k], report.alpha1[k], report.alpha2[k],
                              report.se1[k], report.se2[k], t1[k], t2[k])])
