"""Shared parameters, grids and solved ground states for the test suite"""

import pytest

from field import GridSpec
from groundstate import minimize_J, petviashvili_solve, rescale_minimizer_to_groundstate
from params import ModelParams, derive_exponents


@pytest.fixture(scope="session")
def subcritical():
    return ModelParams(N=2, alpha=0.8, gamma=0.1, p=2.0)


@pytest.fixture(scope="session")
def critical():
    return ModelParams(N=2, alpha=0.8, gamma=0.1, p=2.7)


@pytest.fixture(scope="session")
def supercritical():
    return ModelParams(N=2, alpha=0.8, gamma=0.4, p=4.0)


@pytest.fixture(scope="session")
def subcritical_exps(subcritical):
    return derive_exponents(subcritical)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(2, 64, 12.0)


@pytest.fixture(scope="session")
def solver_grid():
    return GridSpec.default_for(2)


@pytest.fixture(scope="session")
def phi_record(subcritical, solver_grid):
    return petviashvili_solve(subcritical, solver_grid)


@pytest.fixture(scope="session")
def psi_record(subcritical, solver_grid):
    return minimize_J(subcritical, solver_grid)


@pytest.fixture(scope="session")
def rescaled_record(psi_record, subcritical):
    return rescale_minimizer_to_groundstate(psi_record, subcritical)


@pytest.fixture(scope="session")
def evolution_phi(subcritical):
    return petviashvili_solve(subcritical, GridSpec(2, 64, 8.0))
