import numpy as np
import pytest

from pathmix import build_cosine_schedule, select_ddim_timesteps


@pytest.fixture(scope="session")
def schedule():
    return build_cosine_schedule(1000)


@pytest.fixture(scope="session")
def plan(schedule):
    return select_ddim_timesteps(schedule, 50)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
