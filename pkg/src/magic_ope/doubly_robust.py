"""Doubly robust estimators (DR, WDR and their v2 forms) and off-policy j-step returns."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .importance import WeightMatrix, importance_weights, normalized
from .mdp import Dataset, Policy
from .model import ValueTables

INF = math.inf
DR_VARIANTS = ("DR", "WDR", "DR-v2", "WDR-v2")


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StepWeightMatrix:
    """Per-step weights w[i, t] for t = 0..L-1; the t = -1 weight is 1/n."""

    w: np.ndarray
    mode: str

    @property
    def prev(self) -> np.ndarray:
        """w[i, t-1] aligned with step t."""
        n = self.w.shape[0]
        return np.hstack([np.full((n, 1), 1.0 / n), self.w[:, :-1]])


def step_weights(weights: WeightMatrix, mode: str = "WDR") -> StepWeightMatrix:
    if mode == "DR":
        return StepWeightMatrix(weights.rho / weights.rho.shape[0], mode)
    if mode == "WDR":
        return StepWeightMatrix(normalized(weights.rho), mode)
    raise ValueError(f"unknown weighting mode {mode!r}")


@dataclass(frozen=True, eq=False)
class ModelTerms:
    """Model predictions looked up along every trajectory.

    ``q[i, t]`` is q_hat_t(S_t, A_t) (or its v2 substitute) and ``v[i, t]``
    is v_hat_t(S_t) for t = 0..L, with the final column zero because the
    episode is over at step L.
    """

    q: np.ndarray
    v: np.ndarray


def model_terms(data: Dataset, values: ValueTables, gamma: float, v2: bool = False) -> ModelTerms:
    n, L = data.actions.shape
    if values.model_horizon < L:
        raise ConfigurationError(
            f"value tables cover {values.model_horizon} steps but trajectories have {L}")
    if data.states.max() >= values.v_hat.shape[1]:
        raise ConfigurationError("dataset contains states outside the model's state space")
    S, A = data.states, data.actions
    v = np.zeros((n, L + 1))
    q = np.empty((n, L))
    for t in range(L):
        v[:, t] = values.v_at(t, S[:, t])
    for t in range(L):
        if v2:
            q[:, t] = values.r_at(t, S[:, t], A[:, t]) + gamma * v[:, t + 1]
        else:
            q[:, t] = values.q_at(t, S[:, t], A[:, t])
    return ModelTerms(q=q, v=v)


def _dr_sum(data: Dataset, sw: StepWeightMatrix, terms: ModelTerms, gamma: float) -> float:
    L = data.horizon
    discounts = gamma ** np.arange(L)
    per_step = sw.w * (data.rewards - terms.q) + sw.prev * terms.v[:, :L]
    return float(np.sum(per_step * discounts))


def dr_estimate(data: Dataset, pi_e: Policy, values: ValueTables, weights: WeightMatrix,
                gamma: float, variant: str = "DR") -> float:
    """Non-recursive (weighted) doubly robust estimate.

    ``variant`` is one of ``DR``, ``WDR``, ``DR-v2`` or ``WDR-v2``. The v2
    forms replace q_hat(S_t, A_t) by r_hat(S_t, A_t) + gamma * v_hat(S_{t+1}).
    """
    if variant not in DR_VARIANTS:
        raise ValueError(f"unknown DR variant {variant!r}; expected one of {DR_VARIANTS}")
    mode = "WDR" if variant.startswith("WDR") else "DR"
    terms = model_terms(data, values, gamma, v2=variant.endswith("v2"))
    return _dr_sum(data, step_weights(weights, mode), terms, gamma)


def dr_recursive(data: Dataset, pi_e: Policy, values: ValueTables, gamma: float,
                 terminal: int | None = None) -> float:
    """Backward-recursive DR, averaged over trajectories."""
    ratios = importance_weights(data, pi_e, terminal).ratios
    terms = model_terms(data, values, gamma)
    x = np.zeros(data.n)
    for t in range(data.horizon - 1, -1, -1):
        x = terms.v[:, t] + ratios[:, t] * (data.rewards[:, t] + gamma * x - terms.q[:, t])
    return float(x.mean())


def default_j_set(horizon: int) -> tuple:
    return (-1, *range(horizon), INF)


BINARY_J_SET = (-1, INF)


@dataclass(frozen=True, eq=False)
class ReturnMatrix:
    """Per-trajectory components of the off-policy j-step returns.

    ``components[i, k]`` is trajectory i's share of the return of length
    ``j_set[k]``; column sums give the returns themselves.
    """

    components: np.ndarray
    j_set: tuple

    @property
    def returns(self) -> np.ndarray:
        return self.components.sum(axis=0)

    @property
    def n(self) -> int:
        return self.components.shape[0]


def _check_j_set(j_set: Sequence) -> tuple:
    j_set = tuple(j_set)
    for j in j_set:
        if not (j == INF or (float(j).is_integer() and j >= -1)):
            raise ValueError(f"invalid return length {j!r}; lengths are integers >= -1 or inf")
    return j_set


def jstep_components(data: Dataset, pi_e: Policy, values: ValueTables, weights: StepWeightMatrix,
                     gamma: float, j_set: Sequence | None = None) -> ReturnMatrix:
    """Per-trajectory off-policy j-step return components.

    Lengths at or beyond the last step (including ``inf``) coincide with the
    weighted doubly robust per-trajectory terms.
    """
    n, L = data.actions.shape
    j_set = _check_j_set(default_j_set(L) if j_set is None else j_set)
    terms = model_terms(data, values, gamma)
    discounts = gamma ** np.arange(L + 1)
    w, prev = weights.w, weights.prev
    per_step = discounts[:L] * (w * (data.rewards - terms.q) + prev * terms.v[:, :L])
    # prefix[:, k] = sum of per-step terms for t < k
    prefix = np.hstack([np.zeros((n, 1)), np.cumsum(per_step, axis=1)])
    w_ext = np.hstack([prev[:, :1], w])  # w_ext[:, j + 1] = w_j, j = -1..L-1
    cols = []
    for j in j_set:
        jj = L - 1 if j >= L - 1 else int(j)
        cols.append(prefix[:, jj + 1] + discounts[jj + 1] * w_ext[:, jj + 1] * terms.v[:, jj + 1])
    return ReturnMatrix(components=np.column_stack(cols), j_set=j_set)
