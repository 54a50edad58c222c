import time

import pytest

from spa_inattention.calibration import default_grid_spec, default_model
from spa_inattention.re_solver import solve_re
from spa_inattention.ri_solver import solve_ri
from spa_inattention.statespace import Environment


@pytest.fixture(scope="session")
def env():
    return Environment.build(default_model(), default_grid_spec())


@pytest.fixture(scope="session")
def sol_re(env):
    return solve_re(env)


@pytest.fixture(scope="session")
def timed_ri(env):
    t0 = time.perf_counter()
    sol = solve_ri(env)
    return sol, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sol_ri(timed_ri):
    return timed_ri[0]


@pytest.fixture(scope="session")
def small_env():
    return Environment.build(default_model(), default_grid_spec(n_assets=10, n_aime=2, asset_max=300_000.0))


@pytest.fixture(scope="session")
def small_re(small_env):
    return solve_re(small_env)


@pytest.fixture(scope="session")
def small_ri(small_env):
    return solve_ri(small_env)
