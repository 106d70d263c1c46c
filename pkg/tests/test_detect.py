import numpy as np
import pytest

from afgame import (AFConfig, CoefficientEngine, GameParams, SimConfig,
                    TruncGaussPrior, detection_score, euler_maruyama, moment_path,
                    ne_gains, optimize, pair_gains, per_step_regression, residuals)
from afgame.detect import detection_report, write_report_csv
from afgame.simulate import TrajectoryBatch


def test_noiseless_residuals_vanish(grid):
    p = GameParams(sigmaA=0.0, sigmaB=0.1, x0=(1.0, 1.0))
    gains = ne_gains(p, 1.0, 1.0, grid)
    batch = euler_maruyama(gains, p, SimConfig(100, 16, 1, x0=(1.0, 1.0)))
    res = residuals(batch, gains.K[:, 0, :], grid)
    assert np.abs(res).max() < 1e-15


def test_residuals_iid_gaussian_when_prediction_exact(params, grid):
    p = GameParams(x0=(1.0, 1.0))
    gains = ne_gains(p, 1.0, 1.0, grid)
    batch = euler_maruyama(gains, p, SimConfig(100, 20_000, 2, x0=(1.0, 1.0)))
    res = residuals(batch, gains.K[:, 0, :], grid)
    want = p.sigmaA**2 * grid.dt
    var = res.var(axis=0, ddof=1)
    se = var * np.sqrt(2.0 / (res.shape[0] - 1))
    frac = np.mean(np.abs(var - want) <= 3 * se)
    assert frac >= 0.95
    assert np.abs(res.mean(axis=0)).max() <= 5 * np.sqrt(want / res.shape[0])


def test_residual_mean_matches_drift_discrepancy(grid):
    p = GameParams(x0=(1.0, 1.0))
    eng = CoefficientEngine(p, TruncGaussPrior(mu=1.5, rho=0.3),
                            TruncGaussPrior(mu=1.2, rho=0.3), grid)
    base = eng.row("A_baseline")
    gains = pair_gains(base, eng.row("B_tilde"))
    batch = euler_maruyama(gains, p, SimConfig(100, 20_000, 3, x0=(1.0, 1.0)))
    res = residuals(batch, eng.row("A_predicted"), grid)
    mom = moment_path(gains, p, (1.0, 1.0), grid)
    delta = base.nodes - eng.row("A_predicted").nodes
    want = np.einsum("tk,tk->t", delta[:-1], mom.mean[:-1]) * grid.dt
    got = res.mean(axis=0)
    se = res.std(axis=0, ddof=1) / np.sqrt(res.shape[0])
    assert np.mean(np.abs(got - want) <= 3 * se) >= 0.95


def test_planted_coefficients_recovered_exactly(grid):
    rng = np.random.default_rng(6)
    states = rng.standard_normal((400, grid.N + 1, 2))
    batch = TrajectoryBatch(states, ("synthetic", "synthetic"), 0)
    res = 1.7 * states[:, :-1, 0] - 0.4 * states[:, :-1, 1]
    a1, a2, s1, s2, bad = per_step_regression(res, batch, grid)
    assert not bad.any()
    assert np.abs(a1 - 1.7).max() < 1e-10
    assert np.abs(a2 + 0.4).max() < 1e-10


def test_rank_deficiency_flagged_at_zero_start(params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    batch = euler_maruyama(gains, params, SimConfig(100, 500, 4))
    res = residuals(batch, engine.row("A_predicted"), grid)
    a1, a2, s1, s2, bad = per_step_regression(res, batch, grid)
    assert bad[0]          # all regressors are exactly zero at t0
    assert not bad[1:].any()
    assert a1[0] == 0.0 and a2[0] == 0.0


def test_regression_requires_three_paths(grid, params, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    batch = euler_maruyama(gains, params, SimConfig(100, 2, 5))
    res = residuals(batch, engine.row("A_predicted"), grid)
    with pytest.raises(ValueError):
        per_step_regression(res, batch, grid)


def test_detection_score_basics():
    assert detection_score(np.zeros(5), np.zeros(5)) == 0.0
    assert detection_score(np.array([0.0, -0.3, 0.1]),
                           np.array([0.2, 0.0, 0.0])) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        detection_score(np.array([]), np.array([]))


def test_detection_score_invariant_to_path_order(params, grid, engine_mismatched):
    eng = engine_mismatched
    gains = pair_gains(eng.row("A_baseline"), eng.row("B_tilde"))
    batch = euler_maruyama(gains, params, SimConfig(100, 2_000, 8))
    rep1 = detection_report(batch, eng.row("A_predicted"), grid)
    shuffled = TrajectoryBatch(batch.states[::-1].copy(), batch.labels, batch.seed)
    rep2 = detection_report(shuffled, eng.row("A_predicted"), grid)
    assert rep1.DAF == pytest.approx(rep2.DAF, rel=1e-12)


def test_alpha_matches_analytic_targets_under_af_play(engine_mismatched):
    eng = engine_mismatched
    p, grid = eng.params, eng.grid
    sol = optimize(eng, AFConfig())
    gains = pair_gains(sol.afGains, eng.row("B_tilde"))
    batch = euler_maruyama(gains, p, SimConfig(100, 10_000, 9))
    rep = detection_report(batch, eng.row("A_predicted"), grid, sol.afGains)
    ok = ((np.abs(rep.alpha1 - rep.target1) <= 3 * rep.se1)
          & (np.abs(rep.alpha2 - rep.target2) <= 3 * rep.se2))
    valid = ~rep.rank_deficient
    assert ok[valid].mean() >= 0.95


def test_af_play_is_more_detectable_than_baseline(engine):
    p, grid = engine.params, engine.grid
    sol = optimize(engine, AFConfig())
    pred = engine.row("A_predicted")
    b_af = euler_maruyama(pair_gains(sol.afGains, engine.row("B_tilde")), p,
                          SimConfig(100, 5_000, 10))
    b_base = euler_maruyama(pair_gains(engine.row("A_baseline"),
                                       engine.row("B_tilde")), p,
                            SimConfig(100, 5_000, 11))
    rep_af = detection_report(b_af, pred, grid)
    rep_base = detection_report(b_base, pred, grid)
    assert rep_af.DAF > rep_base.DAF


def test_report_csv_schema(tmp_path, params, grid, engine):
    gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
    batch = euler_maruyama(gains, params, SimConfig(100, 200, 12))
    rep = detection_report(batch, engine.row("A_predicted"), grid,
                           engine.row("A_baseline"))
    out = tmp_path / "detect.csv"
    write_report_csv(out, rep, "unit test")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "t,alpha1,alpha2,se1,se2,target1,target2"
    assert len(lines) == 2 + grid.N
