"""Tabular finite-horizon MDPs, policies, trajectory simulation and exact evaluation.

The last state index of every MDP is the terminal absorbing state. Episodes
always have exactly ``horizon`` steps; once the terminal state is entered the
remaining steps are padding with zero reward.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

PROB_TOL = 1e-12


def _check_prob_rows(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite probabilities")
    if np.any(arr < 0):
        raise ValueError(f"{what}: negative probabilities")
    bad = np.abs(arr.sum(axis=-1) - 1.0) > PROB_TOL
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{what}: row {idx} does not sum to 1")


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite-horizon tabular MDP with deterministic (s, a, s') rewards.

    Parameters
    ----------
    trans : array, shape (S, A, S)
        ``trans[s, a, s']`` is the probability of moving to ``s'``.
    reward : array, shape (S, A, S)
        Reward received on the transition ``(s, a, s')``.
    d0 : array, shape (S,)
        Initial state distribution.
    gamma : float
        Discount factor in [0, 1].
    horizon : int
        Number of steps per episode.
    r_min, r_max : float, optional
        Reward bounds. Default to the extreme entries of ``reward``.
    """

    trans: np.ndarray
    reward: np.ndarray
    d0: np.ndarray
    gamma: float
    horizon: int
    r_min: Optional[float] = None
    r_max: Optional[float] = None

    def __post_init__(self) -> None:
        trans = np.array(self.trans, dtype=float)
        reward = np.array(self.reward, dtype=float)
        d0 = np.array(self.d0, dtype=float)
        if trans.ndim != 3 or trans.shape[0] != trans.shape[2]:
            raise ValueError(f"trans must have shape (S, A, S), got {trans.shape}")
        if reward.shape != trans.shape:
            raise ValueError(f"reward shape {reward.shape} != trans shape {trans.shape}")
        if d0.shape != (trans.shape[0],):
            raise ValueError(f"d0 shape {d0.shape} does not match {trans.shape[0]} states")
        _check_prob_rows(trans, "trans")
        _check_prob_rows(d0, "d0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if int(self.horizon) < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        term = trans.shape[0] - 1
        if not np.all(trans[term, :, term] == 1.0) or np.any(reward[term] != 0.0):
            raise ValueError("terminal state must self-loop with zero reward under every action")
        r_min = float(reward.min()) if self.r_min is None else float(self.r_min)
        r_max = float(reward.max()) if self.r_max is None else float(self.r_max)
        reachable = trans > 0
        if np.any(reward[reachable] < r_min) or np.any(reward[reachable] > r_max):
            raise ValueError("rewards fall outside [r_min, r_max]")
        for arr in (trans, reward, d0):
            arr.setflags(write=False)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "r_min", r_min)
        object.__setattr__(self, "r_max", r_max)

    @property
    def num_states(self) -> int:
        return self.trans.shape[0]

    @property
    def num_actions(self) -> int:
        return self.trans.shape[1]

    @property
    def terminal(self) -> int:
        return self.num_states - 1

    @classmethod
    def from_json(cls, path: str | Path) -> "TabularMDP":
        """Load an MDP from a JSON file with fields ``num_states``,
        ``num_actions``, ``d0``, ``trans``, ``reward``, ``gamma`` and ``horizon``."""
        with open(path) as fh:
            raw = json.load(fh)
        mdp = cls(
            trans=raw["trans"],
            reward=raw["reward"],
            d0=raw["d0"],
            gamma=raw["gamma"],
            horizon=raw["horizon"],
            r_min=raw.get("r_min"),
            r_max=raw.get("r_max"),
        )
        if mdp.num_states != raw["num_states"] or mdp.num_actions != raw["num_actions"]:
            raise ValueError(
                f"{path}: declared {raw['num_states']}x{raw['num_actions']} "
                f"but tables are {mdp.num_states}x{mdp.num_actions}"
            )
        return mdp

    def to_json(self, path: str | Path) -> None:
        raw = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "d0": self.d0.tolist(),
            "trans": self.trans.tolist(),
            "reward": self.reward.tolist(),
            "gamma": self.gamma,
            "horizon": self.horizon,
        }
        with open(path, "w") as fh:
            json.dump(raw, fh)


@dataclass(frozen=True, eq=False)
class Policy:
    """Stochastic policy ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ValueError(f"policy table must be 2-D, got shape {probs.shape}")
        _check_prob_rows(probs, "policy")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One episode: ``states`` has ``L + 1`` entries, the others ``L``."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    behavior_probs: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.actions)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A batch of ``n`` equal-length trajectories stored as 2-D arrays.

    ``states`` are the states the estimators see (observed states when the
    generating domain is partially observable). ``latent_states`` keeps the
    simulator's states when they differ.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    behavior_probs: np.ndarray
    latent_states: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.int64)
        actions = np.asarray(self.actions, dtype=np.int64)
        rewards = np.asarray(self.rewards, dtype=float)
        probs = np.asarray(self.behavior_probs, dtype=float)
        if states.ndim != 2 or states.shape[0] == 0:
            raise ValueError("a dataset needs at least one trajectory")
        n, L1 = states.shape
        if actions.shape != (n, L1 - 1) or rewards.shape != actions.shape or probs.shape != actions.shape:
            raise ValueError("inconsistent trajectory array shapes")
        for arr in (states, actions, rewards, probs):
            arr.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "behavior_probs", probs)

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory]) -> "Dataset":
        if not trajectories:
            raise ValueError("a dataset needs at least one trajectory")
        horizons = {t.horizon for t in trajectories}
        if len(horizons) != 1:
            raise ValueError(f"trajectories have different horizons: {sorted(horizons)}")
        return cls(
            states=np.stack([t.states for t in trajectories]),
            actions=np.stack([t.actions for t in trajectories]),
            rewards=np.stack([t.rewards for t in trajectories]),
            behavior_probs=np.stack([t.behavior_probs for t in trajectories]),
        )

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.actions.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Trajectory:
        return Trajectory(self.states[i], self.actions[i], self.rewards[i], self.behavior_probs[i])

    def __iter__(self) -> Iterator[Trajectory]:
        return (self[i] for i in range(self.n))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        latent = None if self.latent_states is None else self.latent_states[idx]
        return Dataset(self.states[idx], self.actions[idx], self.rewards[idx], self.behavior_probs[idx], latent)


def _sample_rows(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Draw one index per row of ``probs`` (shape (n, k))."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = np.inf
    u = rng.random(probs.shape[0])
    return (u[:, None] < cdf).argmax(axis=1)


def _latent_policy(mdp: TabularMDP, policy: Policy, observation_map: Optional[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    if observation_map is None:
        observation_map = np.arange(mdp.num_states)
    observation_map = np.asarray(observation_map, dtype=np.int64)
    if observation_map.shape != (mdp.num_states,):
        raise ValueError("observation_map must have one entry per MDP state")
    if policy.num_actions != mdp.num_actions or observation_map.max() >= policy.num_states:
        raise ValueError("policy table does not match the MDP")
    return observation_map, policy.probs[observation_map]


def sample_dataset(
    mdp: TabularMDP,
    policy: Policy,
    n: int,
    rng: np.random.Generator,
    observation_map: Optional[np.ndarray] = None,
) -> Dataset:
    """Simulate ``n`` i.i.d. episodes of ``mdp`` under ``policy``.

    With an ``observation_map`` the policy acts on observed states and the
    returned dataset records observed states; the latent ones are kept in
    ``Dataset.latent_states``. Steps taken in the terminal state record
    action 0 with behavior probability 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    obs, pi = _latent_policy(mdp, policy, observation_map)
    L, term = mdp.horizon, mdp.terminal
    states = np.empty((n, L + 1), dtype=np.int64)
    actions = np.zeros((n, L), dtype=np.int64)
    rewards = np.zeros((n, L))
    probs = np.ones((n, L))
    rows = np.arange(n)
    states[:, 0] = _sample_rows(rng, np.broadcast_to(mdp.d0, (n, mdp.num_states)))
    for t in range(L):
        s = states[:, t]
        live = s != term
        a = _sample_rows(rng, pi[s])
        s_next = _sample_rows(rng, mdp.trans[s, a])
        a[~live] = 0
        s_next[~live] = term
        actions[:, t] = a
        probs[live, t] = pi[s[live], a[live]]
        rewards[:, t] = mdp.reward[s, a, s_next]
        states[:, t + 1] = s_next
    if np.any(probs <= 0):
        raise AssertionError("sampled an action with zero behavior probability")
    identity = np.array_equal(obs, np.arange(mdp.num_states))
    return Dataset(
        states=states if identity else obs[states],
        actions=actions,
        rewards=rewards,
        behavior_probs=probs,
        latent_states=None if identity else states,
    )


def sample_trajectory(mdp: TabularMDP, policy: Policy, rng: np.random.Generator,
                      observation_map: Optional[np.ndarray] = None) -> Trajectory:
    return sample_dataset(mdp, policy, 1, rng, observation_map)[0]


def episode_return(traj: Trajectory, gamma: float) -> float:
    rewards = np.asarray(traj.rewards, dtype=float)
    return float(np.dot(gamma ** np.arange(len(rewards)), rewards))


def dataset_returns(data: Dataset, gamma: float) -> np.ndarray:
    """Discounted return of every trajectory in ``data``."""
    return data.rewards @ (gamma ** np.arange(data.horizon))


def backward_values(trans: np.ndarray, reward: np.ndarray, pi: np.ndarray, gamma: float,
                    depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Finite-horizon policy evaluation by backward induction.

    Returns ``v`` with shape (depth + 1, S) and ``q`` with shape (depth, S, A),
    where index ``t`` holds values with ``depth - t`` steps remaining.
    """
    S, A, _ = trans.shape
    expected_r = np.einsum("sap,sap->sa", trans, reward)
    v = np.zeros((depth + 1, S))
    q = np.zeros((depth, S, A))
    for t in range(depth - 1, -1, -1):
        q[t] = expected_r + gamma * trans @ v[t + 1]
        v[t] = np.einsum("sa,sa->s", pi, q[t])
    return v, q


def exact_policy_value(mdp: TabularMDP, policy: Policy,
                       observation_map: Optional[np.ndarray] = None) -> float:
    """Exact value of ``policy`` from the start distribution by backward DP."""
    _, pi = _latent_policy(mdp, policy, observation_map)
    v, _ = backward_values(mdp.trans, mdp.reward, pi, mdp.gamma, mdp.horizon)
    return float(mdp.d0 @ v[0])
