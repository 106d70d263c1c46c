import pytest

from afgame import CoefficientEngine, GameParams, TimeGrid, TruncGaussPrior


@pytest.fixture(scope="session")
def params():
    return GameParams()


@pytest.fixture(scope="session")
def grid():
    return TimeGrid(1.0, 100)


@pytest.fixture(scope="session")
def engine(params, grid):
    """Default configuration: well-specified priors, rho = 0.1."""
    return CoefficientEngine(params, TruncGaussPrior(), TruncGaussPrior(), grid)


@pytest.fixture(scope="session")
def engine_mismatched(params, grid):
    """Visibly mismatched prior means so drift-discrepancy rows are nonzero."""
    return CoefficientEngine(params, TruncGaussPrior(mu=1.5, rho=0.3),
                             TruncGaussPrior(mu=1.2, rho=0.3), grid)
