import numpy as np
import pytest

from afgame import (FisherMatrix, GameParams, SimConfig,
                    asymptotic_variance, euler_maruyama, fisher_from_moments,
                    fisher_mc, moment_path, pair_gains, variational_value)
from afgame.controls import GainPath, SensitivityCoefficients
from afgame.fisher import SingularBlock
from afgame.riccati import DEFAULT_REFINE


def const_gains(K, grid, refine=DEFAULT_REFINE):
    M = 2 * grid.N * refine
    table = np.broadcast_to(np.asarray(K, dtype=float), (M + 1, 2, 2)).copy()
    return GainPath(table, ("const", "const"), grid, refine)


def const_sens(rows, grid):
    a = np.broadcast_to(np.asarray(rows, dtype=float)[:, None, :],
                        (3, grid.N + 1, 2)).copy()
    return SensitivityCoefficients(a, "true", grid)


def test_moment_path_driftless_closed_form(grid):
    p = GameParams(sigmaA=0.1, sigmaB=0.1, x0=(1.0, 1.0))
    mom = moment_path(const_gains(np.zeros((2, 2)), grid), p, (1.0, 1.0), grid)
    t = grid.nodes
    want = np.array([[[1 + 0.01 * s, 1.0], [1.0, 1 + 0.01 * s]] for s in t])
    assert np.abs(mom.second - want).max() < 1e-12
    assert np.abs(mom.mean - 1.0).max() < 1e-12


def test_moment_path_exponential_decay(grid):
    p = GameParams(sigmaA=1e-300, sigmaB=1e-300, x0=(1.0, 1.0))
    mom = moment_path(const_gains(-np.eye(2), grid), p, (1.0, 1.0), grid)
    want = np.exp(-grid.nodes)
    assert np.abs(mom.mean[:, 0] - want).max() < 1e-8
    assert np.abs(mom.second[:, 0, 0] - want**2).max() < 1e-8


def test_moment_path_euler_matches_chain_exactly(params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    mom = moment_path(gains, params, params.x0, grid, method="euler")
    # replicate the exact discrete recursion
    P = np.outer(params.x0, params.x0)
    Sig2 = np.diag([params.sigmaA**2, params.sigmaB**2])
    for k in range(grid.N):
        A = np.eye(2) + gains.K[k] * grid.dt
        P = A @ P @ A.T + Sig2 * grid.dt
    assert np.abs(mom.second[-1] - P).max() < 1e-15


def test_second_moment_matches_monte_carlo(params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    mom = moment_path(gains, params, params.x0, grid)
    batch = euler_maruyama(gains, params, SimConfig(100, 50_000, 321))
    emp = np.einsum("pi,pj->ij", batch.states[:, -1], batch.states[:, -1]) / 50_000
    se = batch.states[:, -1, 0].std() ** 2 / np.sqrt(50_000) * 3  # crude per-entry scale
    prod = batch.states[:, -1, :, None] * batch.states[:, -1, None, :]
    se = prod.std(axis=0, ddof=1) / np.sqrt(50_000)
    assert np.all(np.abs(mom.second[-1] - emp) <= 3 * se)


def test_fisher_zero_sensitivities(grid, params, engine):
    sens = const_sens(np.zeros((3, 2)), grid)
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    mom = moment_path(gains, params, params.x0, grid)
    F = fisher_from_moments(sens, mom, params, grid)
    assert np.abs(F.entries).max() == 0.0


def test_fisher_closed_form_half(grid):
    # unit noise, zero drift, zero start: entry = integral of t over [0,1]
    p = GameParams(sigmaA=1.0, sigmaB=1.0, x0=(0.0, 0.0))
    sens = const_sens([[1.0, 0.0]] * 3, grid)
    mom = moment_path(const_gains(np.zeros((2, 2)), grid), p, (0.0, 0.0), grid)
    F = fisher_from_moments(sens, mom, p, grid)
    assert abs(F.entries[0, 0] - 0.5) < 1e-12


def test_fisher_mc_closed_form_half(grid):
    p = GameParams(sigmaA=1.0, sigmaB=1.0, x0=(0.0, 0.0))
    sens = const_sens([[1.0, 0.0]] * 3, grid)
    batch = euler_maruyama(const_gains(np.zeros((2, 2)), grid), p,
                           SimConfig(100, 50_000, 7))
    F = fisher_mc(sens, batch, p, grid)
    assert abs(F.entries[0, 0] - 0.5) <= 3 * F.se[0, 0]


def test_fisher_mc_agrees_with_moments(params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    sens = engine.sensitivities("true")
    mom = moment_path(gains, params, params.x0, grid)
    F_mom = fisher_from_moments(sens, mom, params, grid)
    batch = euler_maruyama(gains, params, SimConfig(100, 20_000, 99))
    F_mc = fisher_mc(sens, batch, params, grid)
    gap = np.abs(F_mom.entries - F_mc.entries)
    assert np.all(gap <= 3 * np.where(F_mc.se > 0, F_mc.se, np.inf))


def test_fisher_is_psd(params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    mom = moment_path(gains, params, params.x0, grid)
    for kind in ("true", "proxy"):
        F = fisher_from_moments(engine.sensitivities(kind), mom, params, grid)
        assert np.linalg.eigvalsh(F.entries).min() >= -1e-10


def test_fisher_mc_rejects_empty_batch(grid, params, engine):
    from afgame.simulate import TrajectoryBatch
    empty = TrajectoryBatch(np.zeros((0, grid.N + 1, 2)), ("x", "y"), 0)
    with pytest.raises(ValueError):
        fisher_mc(engine.sensitivities("true"), empty, params, grid)


def test_asymptotic_variance_diagonal():
    F = FisherMatrix(np.diag([2.0, 3.0, 4.0]), "true", "synthetic")
    assert asymptotic_variance(F) == pytest.approx(0.5, abs=1e-15)


def test_asymptotic_variance_block_example():
    F = FisherMatrix(np.array([[2.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
                     "true", "synthetic")
    assert asymptotic_variance(F) == pytest.approx(1.0, abs=1e-14)


def test_asymptotic_variance_matches_full_inverse():
    rng = np.random.default_rng(3)
    for _ in range(25):
        M = rng.standard_normal((3, 3))
        F = FisherMatrix(M @ M.T + 0.1 * np.eye(3), "true", "synthetic")
        want = np.linalg.inv(F.entries)[0, 0]
        assert abs(asymptotic_variance(F) - want) < 1e-10


def test_asymptotic_variance_permutation_invariance():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((3, 3))
    E = M @ M.T + 0.1 * np.eye(3)
    P = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float)
    F1 = FisherMatrix(E, "true", "synthetic")
    F2 = FisherMatrix(P @ E @ P.T, "true", "synthetic")
    assert asymptotic_variance(F1) == pytest.approx(asymptotic_variance(F2), rel=1e-12)


def test_singular_block_raises_and_ridge_recovers():
    E = np.array([[2.0, 1e-8, 0.0], [1e-8, 1.0, 1.0], [0.0, 1.0, 1.0]])
    F = FisherMatrix(E, "true", "synthetic")
    with pytest.raises(SingularBlock):
        asymptotic_variance(F)
    v = asymptotic_variance(F, cond_limit=np.inf, ridge=1e-10)
    assert np.isfinite(v) and v > 0


def test_variational_value_at_zero_and_minimizer():
    rng = np.random.default_rng(9)
    for _ in range(25):
        M = rng.standard_normal((3, 3))
        F = FisherMatrix(M @ M.T + 0.2 * np.eye(3), "true", "synthetic")
        assert variational_value(F, [0.0, 0.0]) == pytest.approx(F.entries[0, 0])
        zstar = -np.linalg.solve(F.entries[1:, 1:], F.entries[1:, 0])
        schur = 1.0 / asymptotic_variance(F)
        assert abs(variational_value(F, zstar) - schur) < 1e-10
        delta = rng.standard_normal(2)
        assert variational_value(F, zstar + delta) > variational_value(F, zstar)


def test_moment_covariance_stays_psd(params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    p = GameParams(x0=(1.0, 1.0))
    mom = moment_path(gains, p, (1.0, 1.0), grid)
    cov = mom.second - np.einsum("ti,tj->tij", mom.mean, mom.mean)
    eigs = np.linalg.eigvalsh(cov)
    assert eigs.min() >= -1e-10
