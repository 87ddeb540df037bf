"""Shared fixtures: benchmark MDPs and small seeded databases.

Databases built here are intentionally small so unit tests stay fast; the
acceptance suite builds its own larger ones.
"""

import numpy as np
import pytest

from trajstitch import (
    build_ember,
    build_gridworld,
    build_linear,
    build_policy,
    populate_biased,
    populate_debiased,
)
from trajstitch.database import seed_policy_grid
from trajstitch.experiments import intensity_seed_grid


def make_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


@pytest.fixture(scope="session")
def ember_mdp():
    return build_ember(horizon=8)


@pytest.fixture(scope="session")
def gridworld_mdp():
    return build_gridworld(horizon=4)


@pytest.fixture(scope="session")
def linear_mdp():
    return build_linear()


@pytest.fixture(scope="session")
def ember_grid():
    return intensity_seed_grid(9)


@pytest.fixture(scope="session")
def ember_db(ember_mdp, ember_grid):
    """Debiased ember database: 9 intensity policies x 8 steps = 72 sets."""
    return seed_policy_grid(
        ember_mdp, "intensity", ember_grid, horizon=8, rng=make_rng(101), mode="debiased"
    )


@pytest.fixture(scope="session")
def ember_db_biased(ember_mdp, ember_grid):
    """Biased twin of ``ember_db``: same seed, so same visited (x, w) rows."""
    return seed_policy_grid(
        ember_mdp, "intensity", ember_grid, horizon=8, rng=make_rng(101), mode="biased"
    )


@pytest.fixture(scope="session")
def linear_db(linear_mdp):
    policy = build_policy(linear_mdp, "constant", [0])
    return populate_debiased(linear_mdp, policy, n=12, horizon=6, rng=make_rng(7))


@pytest.fixture(scope="session")
def linear_db_biased(linear_mdp):
    policy = build_policy(linear_mdp, "constant", [0])
    return populate_biased(linear_mdp, policy, n=12, horizon=6, rng=make_rng(7))
