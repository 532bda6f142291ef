"""Benchmark domains: ModelFail, ModelWin, a 4x4 gridworld and the Hybrid domain.

All domains are undiscounted finite-horizon problems.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict

import numpy as np

from .mdp import Dataset, Policy, TabularMDP, exact_policy_value, sample_dataset


def softmax_policy(weights) -> Policy:
    """Row-wise softmax of an (observed state, action) weight table."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    z = np.exp(w - w.max(axis=1, keepdims=True))
    return Policy(z / z.sum(axis=1, keepdims=True))


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A latent MDP plus what the agent sees of it and the two policies."""

    name: str
    mdp: TabularMDP
    observation_map: np.ndarray
    behavior: Policy
    evaluation: Policy
    model_horizon: int

    def __post_init__(self) -> None:
        obs = np.asarray(self.observation_map, dtype=np.int64)
        object.__setattr__(self, "observation_map", obs)
        k = self.behavior.num_states
        if set(obs.tolist()) != set(range(k)):
            raise ValueError(f"{self.name}: observation map is not onto the {k} observed states")
        if obs[self.mdp.terminal] != k - 1:
            raise ValueError(f"{self.name}: terminal state must map to the last observed state")
        if np.any((self.behavior.probs == 0) & (self.evaluation.probs > 0)):
            raise ValueError(f"{self.name}: evaluation policy acts where the behavior policy never does")

    @property
    def num_observed_states(self) -> int:
        return self.behavior.num_states

    @property
    def num_actions(self) -> int:
        return self.mdp.num_actions

    @property
    def horizon(self) -> int:
        return self.mdp.horizon

    @property
    def gamma(self) -> float:
        return self.mdp.gamma

    @cached_property
    def true_value(self) -> float:
        """v(pi_e) by exact dynamic programming on the latent MDP."""
        return exact_policy_value(self.mdp, self.evaluation, self.observation_map)

    def behavior_value(self) -> float:
        return exact_policy_value(self.mdp, self.behavior, self.observation_map)

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        return sample_dataset(self.mdp, self.behavior, n, rng, self.observation_map)


def _uniform_rows(k: int, num_actions: int) -> np.ndarray:
    return np.full((k, num_actions), 1.0 / num_actions)


def build_modelfail() -> DomainSpec:
    """Three latent states seen as one. a1 leads to the upper state, a2 to the
    lower; the next step always terminates with reward +1 (upper) or -1 (lower)."""
    S, term = 4, 3
    trans = np.zeros((S, 2, S))
    reward = np.zeros((S, 2, S))
    trans[0, 0, 1] = trans[0, 1, 2] = 1.0
    trans[1, :, term] = trans[2, :, term] = trans[term, :, term] = 1.0
    reward[1, :, term] = 1.0
    reward[2, :, term] = -1.0
    d0 = np.eye(S)[0]
    mdp = TabularMDP(trans, reward, d0, gamma=1.0, horizon=2)
    behavior = softmax_policy([[1.0, -1.0], [0.0, 0.0]])
    evaluation = softmax_policy([[-1.0, 1.0], [0.0, 0.0]])
    return DomainSpec("modelfail", mdp, np.array([0, 0, 0, 1]), behavior, evaluation, model_horizon=2)


def _modelwin_tables(trans: np.ndarray, reward: np.ndarray, s1: int, s2: int, s3: int) -> None:
    trans[s1, 0, s2], trans[s1, 0, s3] = 0.4, 0.6
    trans[s1, 1, s2], trans[s1, 1, s3] = 0.6, 0.4
    reward[s1, :, s2] = 1.0
    reward[s1, :, s3] = -1.0
    trans[s2, :, s1] = trans[s3, :, s1] = 1.0


MODELWIN_BEHAVIOR_S1 = [1.0, 0.0]
MODELWIN_EVALUATION_S1 = [0.0, 1.0]


def build_modelwin() -> DomainSpec:
    """s1 -> {s2 (+1), s3 (-1)} with action-dependent odds 0.4/0.6; s2, s3 -> s1."""
    S, term = 4, 3
    trans = np.zeros((S, 2, S))
    reward = np.zeros((S, 2, S))
    _modelwin_tables(trans, reward, 0, 1, 2)
    trans[term, :, term] = 1.0
    mdp = TabularMDP(trans, reward, np.eye(S)[0], gamma=1.0, horizon=20)
    zeros = [0.0, 0.0]
    behavior = softmax_policy([MODELWIN_BEHAVIOR_S1, zeros, zeros, zeros])
    evaluation = softmax_policy([MODELWIN_EVALUATION_S1, zeros, zeros, zeros])
    return DomainSpec("modelwin", mdp, np.arange(S), behavior, evaluation, model_horizon=20)


def build_hybrid() -> DomainSpec:
    """ModelFail whose exit leads into ModelWin's start instead of terminating."""
    # latent: 0 start, 1 upper, 2 lower | 3 s1, 4 s2, 5 s3 | 6 terminal
    S, term = 7, 6
    trans = np.zeros((S, 2, S))
    reward = np.zeros((S, 2, S))
    trans[0, 0, 1] = trans[0, 1, 2] = 1.0
    trans[1, :, 3] = trans[2, :, 3] = 1.0
    reward[1, :, 3] = 1.0
    reward[2, :, 3] = -1.0
    _modelwin_tables(trans, reward, 3, 4, 5)
    trans[term, :, term] = 1.0
    mdp = TabularMDP(trans, reward, np.eye(S)[0], gamma=1.0, horizon=22)
    zeros = [0.0, 0.0]
    behavior = softmax_policy([[1.0, -1.0], MODELWIN_BEHAVIOR_S1, zeros, zeros, zeros])
    evaluation = softmax_policy([[-1.0, 1.0], MODELWIN_EVALUATION_S1, zeros, zeros, zeros])
    obs = np.array([0, 0, 0, 1, 2, 3, 4])
    return DomainSpec("hybrid", mdp, obs, behavior, evaluation, model_horizon=22)


GRID_SIZE = 4
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
GRID_TEMPERATURES = {2: 2.0, 3: 1.0, 4: 0.5, 5: 0.25}
STEP_REWARD, GOAL_REWARD = -1.0, 10.0


def gridworld_mdp(horizon: int = 100) -> TabularMDP:
    """Deterministic 4x4 grid. Start top-left; stepping onto the bottom-right
    goal ends the episode with +10, every other step costs 1. Moves into a
    wall leave the agent in place."""
    cells = GRID_SIZE * GRID_SIZE
    S, term, goal = cells + 1, cells, cells - 1
    trans = np.zeros((S, 4, S))
    reward = np.zeros((S, 4, S))
    for r in range(GRID_SIZE):
        for c in range(GRID_SIZE):
            s = r * GRID_SIZE + c
            for a, (dr, dc) in enumerate(GRID_MOVES):
                if s == goal:
                    trans[s, a, term] = 1.0
                    continue
                nr = min(max(r + dr, 0), GRID_SIZE - 1)
                nc = min(max(c + dc, 0), GRID_SIZE - 1)
                s2 = nr * GRID_SIZE + nc
                if s2 == goal:
                    trans[s, a, term] = 1.0
                    reward[s, a, term] = GOAL_REWARD
                else:
                    trans[s, a, s2] = 1.0
                    reward[s, a, s2] = STEP_REWARD
    trans[term, :, term] = 1.0
    return TabularMDP(trans, reward, np.eye(S)[0], gamma=1.0, horizon=horizon)


def _optimal_q(mdp: TabularMDP) -> np.ndarray:
    expected_r = np.einsum("sap,sap->sa", mdp.trans, mdp.reward)
    v = np.zeros(mdp.num_states)
    while True:
        q = expected_r + mdp.trans @ v
        v_new = q.max(axis=1)
        if np.array_equal(v_new, v):
            return q
        v = v_new


def gridworld_policies(mdp: TabularMDP | None = None) -> Dict[int, Policy]:
    """pi_1 is uniform; pi_2..pi_5 are softmax over optimal action values with
    decreasing temperature."""
    mdp = gridworld_mdp() if mdp is None else mdp
    q = _optimal_q(mdp)
    policies = {1: Policy(_uniform_rows(mdp.num_states, mdp.num_actions))}
    for k, temp in GRID_TEMPERATURES.items():
        policies[k] = softmax_policy(q / temp)
    return policies


def build_gridworld(false_horizon: bool = False, behavior: int = 4, evaluation: int = 5) -> DomainSpec:
    mdp = gridworld_mdp(horizon=100)
    policies = gridworld_policies(mdp)
    name = "gridworld-fh" if false_horizon else "gridworld-th"
    return DomainSpec(name, mdp, np.arange(mdp.num_states), policies[behavior], policies[evaluation],
                      model_horizon=101 if false_horizon else 100)


DOMAINS: Dict[str, Callable[[], DomainSpec]] = {
    "modelfail": build_modelfail,
    "modelwin": build_modelwin,
    "gridworld-th": lambda: build_gridworld(False),
    "gridworld-fh": lambda: build_gridworld(True),
    "hybrid": build_hybrid,
}


def get_domain(name: str) -> DomainSpec:
    try:
        return DOMAINS[name]()
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {', '.join(DOMAINS)}") from None
