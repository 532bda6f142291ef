import numpy as np
import pytest

from magic_ope.domains import build_gridworld, build_hybrid, build_modelfail, build_modelwin
from magic_ope.mdp import Policy, TabularMDP


def random_mdp(rng: np.random.Generator, num_states: int = 4, num_actions: int = 2, horizon: int = 3,
               gamma: float = 0.9) -> TabularMDP:
    """Random MDP whose last state is terminal; some transitions enter it early."""
    S = num_states
    trans = rng.dirichlet(np.ones(S), size=(S, num_actions))
    trans[S - 1] = 0.0
    trans[S - 1, :, S - 1] = 1.0
    reward = rng.uniform(-1, 1, size=(S, num_actions, S))
    reward[S - 1] = 0.0
    d0 = rng.dirichlet(np.ones(S - 1))
    return TabularMDP(trans, reward, np.append(d0, 0.0), gamma=gamma, horizon=horizon)


def random_policy(rng: np.random.Generator, num_states: int, num_actions: int) -> Policy:
    return Policy(rng.dirichlet(np.ones(num_actions), size=num_states))


@pytest.fixture(scope="session")
def modelfail():
    return build_modelfail()


@pytest.fixture(scope="session")
def modelwin():
    return build_modelwin()


@pytest.fixture(scope="session")
def hybrid():
    return build_hybrid()


@pytest.fixture(scope="session")
def gridworld():
    return build_gridworld(false_horizon=False)
