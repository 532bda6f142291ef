"""Maximum-likelihood approximate models and the approximate-model (AM) estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import Dataset, Policy, TabularMDP, backward_values


@dataclass(frozen=True, eq=False)
class LearnedModel:
    """Approximate MDP over the observed state space (last state is terminal).

    ``model_horizon`` is the horizon the model is told about; it may differ
    from the true episode length.
    """

    d0_hat: np.ndarray
    trans_hat: np.ndarray
    reward_hat: np.ndarray
    model_horizon: int
    visit_counts: np.ndarray

    @property
    def num_states(self) -> int:
        return self.trans_hat.shape[0]

    @property
    def num_actions(self) -> int:
        return self.trans_hat.shape[1]

    @property
    def terminal(self) -> int:
        return self.num_states - 1

    @property
    def reward_bound(self) -> float:
        return float(np.abs(self.reward_hat).max(initial=0.0))

    @classmethod
    def from_mdp(cls, mdp: TabularMDP, model_horizon: int | None = None) -> "LearnedModel":
        """Wrap the true tables of a fully observed MDP as a model."""
        counts = np.full((mdp.num_states, mdp.num_actions), np.inf)
        return cls(
            d0_hat=mdp.d0.copy(),
            trans_hat=mdp.trans.copy(),
            reward_hat=mdp.reward.copy(),
            model_horizon=mdp.horizon if model_horizon is None else int(model_horizon),
            visit_counts=counts,
        )


@dataclass(frozen=True, eq=False)
class ValueTables:
    """Time-indexed model values for the evaluation policy.

    ``v_hat[t, s]`` for t = 0..L_m and ``q_hat[t, s, a]`` for t = 0..L_m-1.
    Lookups past the model horizon return 0.
    """

    v_hat: np.ndarray
    q_hat: np.ndarray
    expected_reward: np.ndarray

    @property
    def model_horizon(self) -> int:
        return self.q_hat.shape[0]

    def v_at(self, t: int, states: np.ndarray) -> np.ndarray:
        if t > self.model_horizon:
            return np.zeros(np.shape(states))
        return self.v_hat[t, states]

    def q_at(self, t: int, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        if t >= self.model_horizon:
            return np.zeros(np.shape(states))
        return self.q_hat[t, states, actions]

    def r_at(self, t: int, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Expected immediate reward of (s, a) at step t under the model."""
        if t >= self.model_horizon:
            return np.zeros(np.shape(states))
        return self.expected_reward[states, actions]


def fit_mle_model(data: Dataset, num_states: int, num_actions: int, model_horizon: int) -> LearnedModel:
    """Count-based maximum-likelihood model, pooled over time steps.

    State-action pairs never seen in ``data`` move to the terminal state
    with probability one and reward zero.
    """
    term = num_states - 1
    s = data.states[:, :-1].ravel()
    a = data.actions.ravel()
    s2 = data.states[:, 1:].ravel()
    r = data.rewards.ravel()
    keep = s != term
    s, a, s2, r = s[keep], a[keep], s2[keep], r[keep]

    triple = np.zeros((num_states, num_actions, num_states))
    reward_sum = np.zeros_like(triple)
    np.add.at(triple, (s, a, s2), 1.0)
    np.add.at(reward_sum, (s, a, s2), r)
    counts = triple.sum(axis=2)

    trans = np.zeros_like(triple)
    seen = counts > 0
    trans[seen] = triple[seen] / counts[seen][:, None]
    trans[~seen, term] = 1.0
    reward = np.divide(reward_sum, triple, out=np.zeros_like(triple), where=triple > 0)

    d0 = np.bincount(data.states[:, 0], minlength=num_states) / data.n
    return LearnedModel(d0_hat=d0, trans_hat=trans, reward_hat=reward,
                        model_horizon=int(model_horizon), visit_counts=counts)


def value_tables(model: LearnedModel, pi_e: Policy, gamma: float) -> ValueTables:
    """Backward DP of depth ``model.model_horizon`` inside the model."""
    if pi_e.probs.shape != (model.num_states, model.num_actions):
        raise ValueError("evaluation policy does not match the model's state/action space")
    v, q = backward_values(model.trans_hat, model.reward_hat, pi_e.probs, gamma, model.model_horizon)
    # terminal rows are zero by construction of the model; force exact zeros anyway
    v[:, model.terminal] = 0.0
    q[:, model.terminal, :] = 0.0
    r = np.einsum("sap,sap->sa", model.trans_hat, model.reward_hat)
    r[model.terminal] = 0.0
    return ValueTables(v_hat=v, q_hat=q, expected_reward=r)


def am_estimate(model: LearnedModel, values: ValueTables) -> float:
    return float(model.d0_hat @ values.v_hat[0])
