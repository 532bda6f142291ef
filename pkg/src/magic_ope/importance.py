"""Importance weights and the model-free IS baselines (IS, PDIS, WIS, CWPDIS)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mdp import Dataset, Policy, dataset_returns

VARIANTS = ("IS", "PDIS", "WIS", "CWPDIS")


class DegenerateWeightsWarning(RuntimeWarning):
    """All importance weights at some step are zero."""


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Cumulative importance weights.

    ``rho[i, t]`` is the product of the per-step likelihood ratios of
    trajectory i up to and including step t (t = 0..L-1). The t = -1
    column, identically 1, is available as ``with_initial``.
    """

    rho: np.ndarray
    ratios: np.ndarray

    @property
    def with_initial(self) -> np.ndarray:
        return np.hstack([np.ones((self.rho.shape[0], 1)), self.rho])


def importance_weights(data: Dataset, pi_e: Policy, terminal: int | None = None) -> WeightMatrix:
    """Per-step ratios pi_e(A_t|S_t) / pi_b(A_t|S_t) and their running products.

    Steps spent in the terminal state (default: the last state of ``pi_e``)
    carry ratio 1.
    """
    if terminal is None:
        terminal = pi_e.num_states - 1
    bp = data.behavior_probs
    if np.any(bp <= 0):
        i, t = np.argwhere(bp <= 0)[0]
        raise ValueError(f"trajectory {i}, step {t}: stored behavior probability is {bp[i, t]}")
    s = data.states[:, :-1]
    ratios = pi_e.probs[s, data.actions] / bp
    ratios[s == terminal] = 1.0
    return WeightMatrix(rho=np.cumprod(ratios, axis=1), ratios=ratios)


def normalized(rho: np.ndarray) -> np.ndarray:
    """Column-normalise ``rho``; columns summing to zero become all-zero."""
    totals = rho.sum(axis=0)
    return np.divide(rho, totals, out=np.zeros_like(rho), where=totals != 0)


def is_estimate(data: Dataset, pi_e: Policy, weights: WeightMatrix, gamma: float, variant: str = "IS") -> float:
    n, L = data.actions.shape
    discounts = gamma ** np.arange(L)
    rho = weights.rho
    if variant == "IS":
        return float(np.mean(rho[:, -1] * dataset_returns(data, gamma)))
    if variant == "PDIS":
        return float(np.sum(rho * data.rewards * discounts) / n)
    if variant == "WIS":
        total = rho[:, -1].sum()
        if total == 0:
            warnings.warn("WIS: all final importance weights are zero; returning 0",
                          DegenerateWeightsWarning, stacklevel=2)
            return 0.0
        return float(rho[:, -1] @ dataset_returns(data, gamma) / total)
    if variant == "CWPDIS":
        return float(np.sum(normalized(rho) * data.rewards * discounts))
    raise ValueError(f"unknown importance sampling variant {variant!r}; expected one of {VARIANTS}")
