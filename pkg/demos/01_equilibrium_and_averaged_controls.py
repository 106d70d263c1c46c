"""Solve the coupled feedback-coefficient system and build the
prior-averaged implementable controls.

Both players' quadratic value coefficients solve a coupled matrix ODE
backward from zero terminal values.  Under partial information each
player can only play the equilibrium averaged over its prior on the
opponent's coupling parameter; this script shows the full-information
solution, the sufficient existence horizon, and the averaged gains.
"""
import numpy as np

from afgame import (CoefficientEngine, GameParams, TimeGrid, TruncGaussPrior,
                    horizon_bound, ne_gains, solve_riccati)

params = GameParams()          # unit weights, noise 0.1, horizon 1, zero start
grid = TimeGrid(params.T, 100)

print("sufficient existence horizon at (mA, mB) = (1, 1):",
      f"{horizon_bound(1.0, 1.0, params):.4f}",
      "(the default horizon 1.0 exceeds it; the solve below is still fine,",
      "the bound is sufficient, not necessary)")

path = solve_riccati(params, params.mA, params.mB, grid)
print("\ntheta^A(0) =\n", np.round(path.thetaA[0], 5))
print("theta^B(0) =\n", np.round(path.thetaB[0], 5))

gains = ne_gains(params, params.mA, params.mB, grid)
print("\nfull-information feedback matrix K(0) =\n", np.round(gains.K[0], 5))

# partial information: each player averages the equilibrium over its prior
engine = CoefficientEngine(params, TruncGaussPrior(mu=1.0, rho=0.3),
                           TruncGaussPrior(mu=1.2, rho=0.3), grid)
avg = engine.averaged()
print("\naveraged coefficients at t=0")
print("  A's own average      :", np.round(avg.thetaAbar[0, 0, :], 5))
print("  B's actual average   :", np.round(avg.thetaBtilde[0, 1, :], 5))
print("  A's proxy for B      :", np.round(avg.thetaBbar[0, 1, :], 5))
print("provenance:", avg.provenance)

row = engine.row("A_baseline")
print("\nA's implementable feedback row at t=0:", np.round(row.nodes[0], 5))
print("terminal row (must vanish):", row.nodes[-1])
