"""Off-policy evaluation for tabular MDPs: importance sampling, doubly robust
estimators, off-policy j-step returns and the MAGIC blend."""
from .domains import DOMAINS, DomainSpec, build_gridworld, build_hybrid, build_modelfail, build_modelwin, get_domain, softmax_policy
from .doubly_robust import BINARY_J_SET, INF, ReturnMatrix, StepWeightMatrix, default_j_set, dr_estimate, dr_recursive, jstep_components, step_weights
from .experiment import ExperimentConfig, ResultRow, run_experiment, run_trial, write_csv
from .importance import WeightMatrix, importance_weights, is_estimate
from .magic import BiasVector, MagicResult, bias_vector, bootstrap_ci, magic_estimate, sample_covariance
from .mdp import Dataset, Policy, TabularMDP, Trajectory, episode_return, exact_policy_value, sample_dataset, sample_trajectory
from .model import LearnedModel, ValueTables, am_estimate, fit_mle_model, value_tables
from .qp import project_to_simplex, solve_simplex_qp

__version__ = "0.1.0"
