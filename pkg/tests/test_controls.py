import numpy as np
import pytest

from afgame import (CoefficientEngine, GameParams, TimeGrid, TruncGaussPrior,
                    ne_gains, pair_gains, solve_riccati, solve_sensitivity)
from afgame.riccati import solve_batch


def test_ne_gains_zero_cost(grid):
    gains = ne_gains(GameParams(qA=0.0, qB=0.0), 1.0, 1.0, grid)
    assert np.abs(gains.K).max() == 0.0


def test_ne_gains_terminal_and_structure(params, grid):
    gains = ne_gains(params, 1.0, 1.0, grid)
    assert np.abs(gains.K[-1]).max() == 0.0
    path = solve_riccati(params, 1.0, 1.0, grid)
    np.testing.assert_allclose(gains.K[0, 0], -path.thetaA[0, 0, :2] / params.rA,
                               atol=1e-12)
    np.testing.assert_allclose(gains.K[0, 1],
                               -np.array([path.thetaB[0, 0, 1], path.thetaB[0, 1, 1]])
                               / params.rB, atol=1e-12)


def test_point_mass_collapse_of_averages(params, grid):
    eng = CoefficientEngine(params, TruncGaussPrior(rho=1e-6),
                            TruncGaussPrior(rho=1e-6), grid)
    avg = eng.averaged()
    full = solve_riccati(params, 1.0, 1.0, grid)
    assert np.abs(avg.thetaAbar - full.thetaA).max() < 1e-4
    assert np.abs(avg.thetaBtilde - full.thetaB).max() < 1e-4
    assert np.abs(avg.thetaBbar - full.thetaB).max() < 1e-4


def test_symmetric_model_flip_permutation(params, grid):
    eng = CoefficientEngine(params, TruncGaussPrior(), TruncGaussPrior(), grid)
    avg = eng.averaged()
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    flipped = flip @ avg.thetaBtilde @ flip
    assert np.abs(avg.thetaAbar - flipped).max() < 1e-10


def test_averaged_paths_lie_in_node_hull(params, grid):
    prior = TruncGaussPrior(mu=1.2, rho=0.3)
    eng = CoefficientEngine(params, TruncGaussPrior(), prior, grid)
    nodes = eng.ruleB.nodes
    sol = solve_batch(params, np.full_like(nodes, params.mA), nodes, grid.N)
    thetaA_nodes = sol[:, 0]  # (N+1, K, 2, 2)
    lo = thetaA_nodes.min(axis=1) - 1e-12
    hi = thetaA_nodes.max(axis=1) + 1e-12
    avg = eng.averaged().thetaAbar
    assert np.all(avg >= lo) and np.all(avg <= hi)


def test_true_sensitivities_point_mass_limit(params, grid):
    muA = 1.3
    eng = CoefficientEngine(params, TruncGaussPrior(mu=muA, rho=1e-6),
                            TruncGaussPrior(), grid)
    sens = eng.sensitivities("true")
    ref = solve_sensitivity(params, muA, params.mB, grid, "mA")
    want = np.stack([ref.dThetaB[:, 0, 1], ref.dThetaB[:, 1, 1]], axis=-1)
    scale = np.abs(want).max()
    assert np.abs(sens.a[1] - want).max() / scale < 2e-2


def test_true_mB_sensitivity_vanishes_without_B_cost(grid):
    p = GameParams(qB=0.0)
    eng = CoefficientEngine(p, TruncGaussPrior(), TruncGaussPrior(), grid)
    assert np.abs(eng.sensitivities("true").a[0]).max() == 0.0


def test_all_sensitivities_vanish_at_terminal_time(engine):
    for kind in ("true", "proxy"):
        assert np.abs(engine.sensitivities(kind).a[:, -1, :]).max() == 0.0


def test_proxy_point_mass_limits(params, grid):
    muB = 1.1
    eng = CoefficientEngine(params, TruncGaussPrior(),
                            TruncGaussPrior(mu=muB, rho=1e-6), grid)
    sens = eng.sensitivities("proxy")
    # scale-direction component integrates an odd function of Z
    assert np.abs(sens.a[2]).max() < 1e-6
    ref = solve_sensitivity(params, params.mA, muB, grid, "mA")
    want = np.stack([ref.dThetaB[:, 0, 1], ref.dThetaB[:, 1, 1]], axis=-1)
    assert np.abs(sens.a[1] - want).max() < 1e-4


def test_proxy_hermite_refinement(params, grid):
    e16 = CoefficientEngine(params, TruncGaussPrior(), TruncGaussPrior(), grid,
                            n_hermite=16)
    e32 = CoefficientEngine(params, TruncGaussPrior(), TruncGaussPrior(), grid,
                            n_hermite=32)
    gap = np.abs(e16.sensitivities("proxy").a - e32.sensitivities("proxy").a).max()
    assert gap < 1e-8


def test_pair_gains_row_independence(engine):
    afish = engine.row("A_baseline")
    g1 = pair_gains(afish, engine.row("B_tilde"))
    g2 = pair_gains(afish, engine.row("B_bar"))
    np.testing.assert_array_equal(g1.table[:, 0], g2.table[:, 0])
    assert np.abs(g1.table[:, 1] - g2.table[:, 1]).max() > 0.0


def test_pair_gains_matches_averaged_entries(engine):
    avg = engine.averaged()
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    p = engine.params
    np.testing.assert_allclose(gains.K[:, 0, 0], -avg.thetaAbar[:, 0, 0] / p.rA,
                               atol=1e-14)
    np.testing.assert_allclose(gains.K[:, 1, 1], -avg.thetaBtilde[:, 1, 1] / p.rB,
                               atol=1e-14)


def test_pair_gains_rejects_grid_mismatch(params, engine):
    other = CoefficientEngine(params, TruncGaussPrior(), TruncGaussPrior(),
                              TimeGrid(1.0, 50))
    with pytest.raises(ValueError):
        pair_gains(engine.row("A_baseline"), other.row("B_tilde"))


def test_coefficient_paths_are_continuous(engine):
    # regression guard: node-to-node jumps stay below the frozen slope bound
    dt = engine.grid.dt
    for name in ("thetaA_bar", "thetaB_tilde", "thetaB_bar",
                 "dmB_true", "dmuA_proxy"):
        path = engine.at_nodes(name)
        jump = np.abs(np.diff(path, axis=0)).max()
        assert jump <= 6.0 * dt
