"""Monte Carlo harness: MSE of each estimator against the exact v(pi_e) over repeated trials."""
from __future__ import annotations

import csv
import logging
import math
import os
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .doubly_robust import BINARY_J_SET, INF, default_j_set, dr_estimate
from .domains import DomainSpec, get_domain
from .importance import importance_weights, is_estimate
from .magic import magic_estimate
from .model import am_estimate, fit_mle_model, value_tables

log = logging.getLogger(__name__)

ESTIMATORS = ("IS", "PDIS", "WIS", "CWPDIS", "DR", "WDR", "DR-v2", "WDR-v2", "AM", "MAGIC", "MAGIC-B")
IS_FAMILY = ("IS", "PDIS", "WIS", "CWPDIS")
DR_FAMILY = ("DR", "WDR", "DR-v2", "WDR-v2")
CSV_HEADER = ("domain", "estimator", "data_mode", "n", "mse", "std_err", "trials")

JSet = Union[str, Sequence]


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str
    estimators: Tuple[str, ...] = ("AM", "DR", "WDR", "MAGIC")
    n_grid: Tuple[int, ...] = tuple(2 ** k for k in range(3, 13))
    trials: int = 128
    data_mode: str = "full"
    kappa: int = 200
    delta: float = 0.1
    base_seed: int = 0
    j_set: JSet = "default"

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}; choose from {', '.join(ESTIMATORS)}")
        if not self.estimators:
            raise ValueError("no estimators selected")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid must hold positive counts")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ValueError("n_grid must be strictly ascending")
        if self.trials < 2:
            raise ValueError("trials must be >= 2")
        if self.data_mode not in ("full", "half"):
            raise ValueError(f"data_mode must be 'full' or 'half', got {self.data_mode!r}")
        if self.data_mode == "half" and any(n % 2 for n in self.n_grid):
            raise ValueError("half-data mode needs even n")
        if self.kappa < 2:
            raise ValueError("kappa must be >= 2")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if isinstance(self.j_set, str):
            if self.j_set not in ("default", "binary"):
                raise ValueError(f"unknown j-set {self.j_set!r}")
        else:
            js = tuple(self.j_set)
            object.__setattr__(self, "j_set", js)
            if -1 not in js or INF not in js:
                raise ValueError("an explicit j-set must contain -1 and inf")
            if any(j != INF and (j != int(j) or j < -1) for j in js):
                raise ValueError(f"j-set entries must be integers >= -1 or inf, got {js}")

    def resolved_j_set(self, horizon: int) -> tuple:
        if isinstance(self.j_set, str):
            if self.j_set == "default":
                return default_j_set(horizon)
            if self.j_set == "binary":
                return BINARY_J_SET
            raise ValueError(f"unknown j-set {self.j_set!r}")
        return tuple(self.j_set)


@dataclass
class TrialResult:
    n: int
    trial: int
    estimates: Dict[str, float]
    reasons: Dict[str, str] = field(default_factory=dict)
    # (min_j g^(j), max_j g^(j)) for every MAGIC-type estimator that ran
    return_ranges: Dict[str, Tuple[float, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class ResultRow:
    domain: str
    estimator: str
    data_mode: str
    n: int
    mse: float
    std_err: float
    trials: int


def trial_seed(base_seed: int, domain: str, n: int, trial: int, *extra: int) -> np.random.SeedSequence:
    """Seed for one trial (and optional sub-stream), a pure function of its coordinates."""
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(zlib.crc32(domain.encode()), n, trial, *extra))


def _generator(seed: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def run_trial(config: ExperimentConfig, n: int, trial_index: int,
              domain: Optional[DomainSpec] = None) -> TrialResult:
    """Draw one dataset of ``n`` trajectories and score every selected estimator on it.

    In half mode the model for DR/WDR/MAGIC comes from the first n/2
    trajectories and their estimates from the other n/2; the IS baselines
    and AM always use the whole dataset.
    """
    domain = get_domain(config.domain) if domain is None else domain
    data = domain.sample(n, _generator(trial_seed(config.base_seed, config.domain, n, trial_index, 0)))
    S, A, gamma = domain.num_observed_states, domain.num_actions, domain.gamma
    pi_e = domain.evaluation
    result = TrialResult(n=n, trial=trial_index, estimates={})

    full_model = fit_mle_model(data, S, A, domain.model_horizon)
    full_values = value_tables(full_model, pi_e, gamma)
    if config.data_mode == "half":
        half = n // 2
        model_data, est_data = data.subset(np.arange(half)), data.subset(np.arange(half, n))
        model = fit_mle_model(model_data, S, A, domain.model_horizon)
        values = value_tables(model, pi_e, gamma)
    else:
        est_data, model, values = data, full_model, full_values

    def score(name: str) -> float:
        if name in IS_FAMILY:
            return is_estimate(data, pi_e, importance_weights(data, pi_e), gamma, name)
        if name == "AM":
            return am_estimate(full_model, full_values)
        if name in DR_FAMILY:
            return dr_estimate(est_data, pi_e, values, importance_weights(est_data, pi_e), gamma, name)
        j_set = BINARY_J_SET if name == "MAGIC-B" else config.resolved_j_set(domain.horizon)
        rng = _generator(trial_seed(config.base_seed, config.domain, n, trial_index, 1, zlib.crc32(name.encode())))
        res = magic_estimate(est_data, pi_e, model, values, gamma, rng, j_set=j_set,
                             kappa=config.kappa, delta=config.delta)
        result.return_ranges[name] = (float(res.returns.min()), float(res.returns.max()))
        return res.estimate

    for name in config.estimators:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                result.estimates[name] = score(name)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                result.estimates[name] = math.nan
                result.reasons[name] = f"{type(exc).__name__}: {exc}"
        if caught and name not in result.reasons:
            result.reasons[name] = "; ".join(str(w.message) for w in caught)
        if name in result.reasons:
            log.info("%s n=%d trial=%d %s: %s", config.domain, n, trial_index, name, result.reasons[name])
    return result


def _run_one(args) -> TrialResult:
    config, n, trial = args
    return run_trial(config, n, trial, _domain_cache(config.domain))


_DOMAIN_CACHE: Dict[str, DomainSpec] = {}


def _domain_cache(name: str) -> DomainSpec:
    if name not in _DOMAIN_CACHE:
        _DOMAIN_CACHE[name] = get_domain(name)
    return _DOMAIN_CACHE[name]


def run_trials(config: ExperimentConfig, threads: Optional[int] = 1) -> List[TrialResult]:
    """All (n, trial) pairs in grid order. Results do not depend on ``threads``."""
    tasks = [(config, n, k) for n in config.n_grid for k in range(config.trials)]
    workers = (os.cpu_count() or 1) if threads is None else max(1, int(threads))
    if workers == 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def aggregate(config: ExperimentConfig, results: Iterable[TrialResult], true_value: float) -> List[ResultRow]:
    by_key: Dict[Tuple[str, int], List[float]] = {}
    for res in results:
        for name, est in res.estimates.items():
            by_key.setdefault((name, res.n), []).append(est)
    rows = []
    for (name, n), ests in by_key.items():
        est = np.array(ests)
        sq = (est[np.isfinite(est)] - true_value) ** 2
        t = len(sq)
        mse = float(sq.mean()) if t else math.nan
        se = float(sq.std(ddof=1) / math.sqrt(t)) if t > 1 else math.nan
        rows.append(ResultRow(config.domain, name, config.data_mode, n, mse, se, t))
    return sorted(rows, key=lambda r: (r.domain, r.estimator, r.n))


def run_experiment(config: ExperimentConfig, threads: Optional[int] = 1) -> List[ResultRow]:
    domain = _domain_cache(config.domain)
    return aggregate(config, run_trials(config, threads), domain.true_value)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_csv(rows: Iterable[ResultRow], path: Union[str, Path]) -> None:
    rows = sorted(rows, key=lambda r: (r.domain, r.estimator, r.n))
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([r.domain, r.estimator, r.data_mode, r.n, _fmt(r.mse), _fmt(r.std_err), r.trials])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path: Union[str, Path]) -> List[ResultRow]:
    with open(path, newline="") as fh:
        return [
            ResultRow(r["domain"], r["estimator"], r["data_mode"], int(r["n"]),
                      float(r["mse"]), float(r["std_err"]), int(r["trials"]))
            for r in csv.DictReader(fh)
        ]
