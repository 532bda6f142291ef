"""MAGIC: blending off-policy j-step returns by minimising estimated MSE."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .doubly_robust import INF, ModelTerms, ReturnMatrix, default_j_set, jstep_components, model_terms, step_weights
from .importance import WeightMatrix, importance_weights
from .mdp import Dataset, Policy
from .model import LearnedModel, ValueTables
from .qp import solve_simplex_qp

DEFAULT_KAPPA = 200
DEFAULT_DELTA = 0.1


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BiasVector:
    b: np.ndarray
    ci_low: float
    ci_high: float


@dataclass(frozen=True, eq=False)
class MagicResult:
    estimate: float
    weights: np.ndarray
    omega: np.ndarray
    bias: BiasVector
    returns: np.ndarray
    j_set: tuple


def sample_covariance(components: ReturnMatrix | np.ndarray) -> np.ndarray:
    """n/(n-1) times the summed outer products of centred per-trajectory components."""
    g = components.components if isinstance(components, ReturnMatrix) else np.asarray(components, dtype=float)
    n = g.shape[0]
    if n < 2:
        raise DegenerateInputError("the covariance of j-step returns needs at least 2 trajectories")
    dev = g - g.mean(axis=0)
    omega = n / (n - 1) * (dev.T @ dev)
    return 0.5 * (omega + omega.T)


def wdr_from_counts(counts: np.ndarray, rho: np.ndarray, rewards: np.ndarray, terms: ModelTerms,
                    gamma: float) -> np.ndarray:
    """WDR of datasets given as multiplicities over a base set of trajectories.

    ``counts`` has shape (k, n); row b says how often each base trajectory
    appears in dataset b. Returns the k WDR estimates.
    """
    n, L = rewards.shape
    counts = np.atleast_2d(counts).astype(float)
    rho_prev = np.hstack([np.ones((n, 1)), rho[:, :-1]])
    num_main = counts @ (rho * (rewards - terms.q))
    den_main = counts @ rho
    num_prev = counts @ (rho_prev * terms.v[:, :L])
    den_prev = counts @ rho_prev
    main = np.divide(num_main, den_main, out=np.zeros_like(num_main), where=den_main != 0)
    prev = np.divide(num_prev, den_prev, out=np.zeros_like(num_prev), where=den_prev != 0)
    return (main + prev) @ (gamma ** np.arange(L))


def auto_xi(data: Dataset, weights: WeightMatrix, reward_bound: float) -> float:
    """Loose bound on the range of the j-step returns used by the Hoeffding clamp."""
    L, n = data.horizon, data.n
    return (2 * L + 1) * reward_bound * float(weights.rho.sum(axis=0).max()) / n


def bootstrap_ci(data: Dataset, pi_e: Policy, values: ValueTables, gamma: float,
                 rng: np.random.Generator, kappa: int = DEFAULT_KAPPA, delta: float = DEFAULT_DELTA,
                 xi: Optional[float] = None, reward_bound: Optional[float] = None,
                 weights: Optional[WeightMatrix] = None) -> tuple[float, float]:
    """Interval around WDR(D): the tighter of a percentile bootstrap and a Hoeffding bound.

    The bootstrap interval runs from the 5th to the 95th percentile of
    ``kappa`` resampled WDR scores and is widened to contain WDR(D).
    """
    if kappa < 2:
        raise ValueError(f"kappa must be >= 2, got {kappa}")
    if weights is None:
        weights = importance_weights(data, pi_e)
    terms = model_terms(data, values, gamma)
    n = data.n
    wdr_full = float(wdr_from_counts(np.ones(n), weights.rho, data.rewards, terms, gamma)[0])

    idx = rng.integers(0, n, size=(kappa, n))
    flat = (idx + n * np.arange(kappa)[:, None]).ravel()
    counts = np.bincount(flat, minlength=kappa * n).reshape(kappa, n)
    scores = np.sort(wdr_from_counts(counts, weights.rho, data.rewards, terms, gamma))

    lo_idx = min(max(math.floor(0.05 * kappa), 1), kappa) - 1
    hi_idx = min(max(math.ceil(0.95 * kappa), 1), kappa) - 1
    low = min(wdr_full, float(scores[lo_idx]))
    high = max(wdr_full, float(scores[hi_idx]))

    if xi is None:
        if reward_bound is None:
            reward_bound = float(np.abs(data.rewards).max(initial=0.0))
        xi = auto_xi(data, weights, reward_bound)
    half_width = xi * math.sqrt(math.log(2.0 / delta) / (2.0 * n))
    low = max(low, wdr_full - half_width)
    high = min(high, wdr_full + half_width)
    return low, high


def bias_vector(components: ReturnMatrix | np.ndarray, ci: tuple[float, float]) -> BiasVector:
    """Signed distance of each j-step return from the interval ``ci``."""
    g = components.returns if isinstance(components, ReturnMatrix) else np.asarray(components, dtype=float)
    low, high = ci
    b = np.where(g > high, g - high, np.where(g < low, g - low, 0.0))
    return BiasVector(b=b, ci_low=float(low), ci_high=float(high))


def magic_estimate(data: Dataset, pi_e: Policy, model: LearnedModel, values: ValueTables, gamma: float,
                   rng: np.random.Generator, j_set: Optional[Sequence] = None,
                   kappa: int = DEFAULT_KAPPA, delta: float = DEFAULT_DELTA,
                   xi: Optional[float] = None) -> MagicResult:
    """Blend the j-step returns in ``j_set`` with weights minimising x'(Omega + b b')x."""
    j_set = default_j_set(data.horizon) if j_set is None else tuple(j_set)
    if -1 not in j_set or INF not in j_set:
        raise ValueError("j_set must contain -1 and inf")
    if data.n < 2:
        raise DegenerateInputError("MAGIC needs at least 2 trajectories")
    weights = importance_weights(data, pi_e, model.terminal)
    comps = jstep_components(data, pi_e, values, step_weights(weights, "WDR"), gamma, j_set)
    omega = sample_covariance(comps)
    reward_bound = max(float(np.abs(data.rewards).max(initial=0.0)), model.reward_bound)
    ci = bootstrap_ci(data, pi_e, values, gamma, rng, kappa=kappa, delta=delta, xi=xi,
                      reward_bound=reward_bound, weights=weights)
    bias = bias_vector(comps, ci)
    x = solve_simplex_qp(omega + np.outer(bias.b, bias.b))
    g = comps.returns
    return MagicResult(estimate=float(x @ g), weights=x, omega=omega, bias=bias, returns=g, j_set=j_set)
