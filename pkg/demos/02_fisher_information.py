"""Fisher information of the hidden triple (mB, muA, rhoA), two ways.

The trajectory's information about B's hidden coupling is assembled from
sensitivity rows of B's averaged feedback coefficients and the state
second moment.  The deterministic moment-ODE route and the Monte Carlo
route must agree within sampling error; the asymptotic variance of the
hidden-coupling estimate is the Schur-complement reduction, or
equivalently the minimum of a quadratic in an auxiliary 2-vector.
"""
import numpy as np

from afgame import (CoefficientEngine, GameParams, SimConfig, TimeGrid,
                    TruncGaussPrior, asymptotic_variance, euler_maruyama,
                    fisher_from_moments, fisher_mc, moment_path, pair_gains,
                    variational_value)

params = GameParams()
grid = TimeGrid(params.T, 100)
engine = CoefficientEngine(params, TruncGaussPrior(), TruncGaussPrior(), grid)

gains = pair_gains(engine.row("A_baseline"), engine.row("B_tilde"))
sens = engine.sensitivities("true")

mom = moment_path(gains, params, params.x0, grid)
F_mom = fisher_from_moments(sens, mom, params, grid)
print("information matrix, moment route:\n", np.round(F_mom.entries, 5))

batch = euler_maruyama(gains, params, SimConfig(100, 20_000, seed=2))
F_mc = fisher_mc(sens, batch, params, grid)
print("\ninformation matrix, Monte Carlo (20k paths):\n", np.round(F_mc.entries, 5))
print("entrywise |diff| / se:\n",
      np.round(np.abs(F_mom.entries - F_mc.entries) / F_mc.se, 2))

var = asymptotic_variance(F_mom)
print("\nasymptotic variance of the hidden-coupling estimate:", round(var, 4))

zstar = -np.linalg.solve(F_mom.entries[1:, 1:], F_mom.entries[1:, 0])
print("variational check: min_z value", round(variational_value(F_mom, zstar), 6),
      "equals the Schur complement", round(1.0 / var, 6))
