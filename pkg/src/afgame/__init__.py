"""Two-player linear-quadratic stochastic differential game under partial
information: prior-averaged implementable controls, Fisher information of
the opponent's hidden coupling parameter, a saddle-point information-
seeking (alignment-faking) controller, and residual-regression detection.
"""

from .model import (GameParams, TruncGaussPrior, QuadratureRule, cost_matrices,
                    trunc_gauss_pdf, score_mu, score_rho, expect_over_prior)
from .riccati import (NonFinite, TimeGrid, RiccatiPath, SensitivityPath,
                      horizon_bound, solve_riccati, solve_sensitivity,
                      af_horizon_bound)
from .controls import (GainRow, GainPath, AveragedCoefficients,
                       SensitivityCoefficients, CoefficientEngine, ne_gains,
                       averaged_coefficients, true_sensitivity_coefficients,
                       proxy_sensitivity_coefficients, pair_gains)
from .fisher import (SingularBlock, MomentPath, FisherMatrix, moment_path,
                     fisher_from_moments, fisher_mc, asymptotic_variance,
                     asymptotic_variance_se, variational_value)
from .simulate import (SimConfig, TrajectoryBatch, euler_maruyama,
                       pathwise_quadratic, save_batch, load_batch)
from .afcontrol import (AFConfig, AFSolution, g_vector, solve_theta_af,
                        af_gains, eval_JAF, optimize, grid_search)
from .detect import (DetectionReport, residuals, per_step_regression,
                     detection_score, detection_report)
from .experiments import ExperimentConfig, run_fig2, run_fig3, run_fig4, run_validate

__version__ = "0.1.0"
