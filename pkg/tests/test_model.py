import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magic_ope.mdp import Dataset, Policy, Trajectory
from magic_ope.model import LearnedModel, am_estimate, fit_mle_model, value_tables

from conftest import random_mdp, random_policy


def _traj(states, actions, rewards):
    return Trajectory(np.array(states), np.array(actions), np.array(rewards, float), np.ones(len(actions)))


def test_single_transition_and_unseen_pairs():
    # states 0, 1, 2 (terminal); one step 0 -a0-> 1
    data = Dataset.from_trajectories([_traj([0, 1], [0], [0.5])])
    m = fit_mle_model(data, 3, 2, 1)
    assert m.trans_hat[0, 0, 1] == 1.0
    assert m.reward_hat[0, 0, 1] == 0.5
    for s, a in [(0, 1), (1, 0), (1, 1), (2, 0)]:
        assert m.trans_hat[s, a, 2] == 1.0
        assert np.all(m.reward_hat[s, a] == 0)
    assert np.allclose(m.trans_hat.sum(axis=2), 1.0, atol=1e-12)
    assert list(m.d0_hat) == [1.0, 0.0, 0.0]


def test_count_ratio():
    data = Dataset.from_trajectories([_traj([0, 1], [0], [1.0]), _traj([0, 2], [0], [3.0])])
    m = fit_mle_model(data, 4, 1, 1)
    assert m.trans_hat[0, 0, 1] == 0.5 and m.trans_hat[0, 0, 2] == 0.5
    assert m.visit_counts[0, 0] == 2


def test_modelwin_mle_probability(modelwin):
    data = modelwin.sample(10_000, np.random.default_rng(21))
    m = fit_mle_model(data, 4, 2, 20)
    k = m.visit_counts[0, 0]
    assert abs(m.trans_hat[0, 0, 1] - 0.4) < 3 * math.sqrt(0.24 / k)


def test_zero_reward_model_gives_zero_values(modelwin):
    data = modelwin.sample(50, np.random.default_rng(0))
    m = fit_mle_model(data, 4, 2, 20)
    zero = LearnedModel(m.d0_hat, m.trans_hat, np.zeros_like(m.reward_hat), 20, m.visit_counts)
    vt = value_tables(zero, modelwin.evaluation, 1.0)
    assert np.all(vt.v_hat == 0) and np.all(vt.q_hat == 0)


def test_exact_modelwin_last_step_q(modelwin):
    vt = value_tables(LearnedModel.from_mdp(modelwin.mdp), modelwin.evaluation, 1.0)
    assert vt.q_hat[19, 0, 0] == pytest.approx(0.4 * 1 + 0.6 * -1, abs=1e-15)
    # s2 and s3 are worth the same at every step
    assert np.allclose(vt.v_hat[:, 1], vt.v_hat[:, 2], atol=1e-15)


def test_false_horizon_tables_are_longer(gridworld):
    from magic_ope.domains import build_gridworld
    fh = build_gridworld(false_horizon=True)
    m = LearnedModel.from_mdp(fh.mdp, fh.model_horizon)
    vt = value_tables(m, fh.evaluation, 1.0)
    assert vt.v_hat.shape[0] == 102 and vt.q_hat.shape[0] == 101
    vt_true = value_tables(LearnedModel.from_mdp(gridworld.mdp), gridworld.evaluation, 1.0)
    # one extra step of lookahead changes the predictions near the end
    assert not np.allclose(vt.v_hat[99, :16], vt_true.v_hat[99, :16])


@pytest.mark.parametrize("name", ["modelwin", "gridworld"])
def test_am_with_true_model_is_exact(name, request):
    dom = request.getfixturevalue(name)
    m = LearnedModel.from_mdp(dom.mdp)
    assert am_estimate(m, value_tables(m, dom.evaluation, 1.0)) == pytest.approx(dom.true_value, abs=1e-9)


def test_am_of_all_unseen_model_is_zero():
    # every trajectory starts in the terminal state: nothing is ever observed
    data = Dataset.from_trajectories([_traj([2, 2, 2], [0, 0], [0, 0])])
    m = fit_mle_model(data, 3, 2, 2)
    d0 = np.array([1.0, 0.0, 0.0])
    m = LearnedModel(d0, m.trans_hat, m.reward_hat, 2, m.visit_counts)
    vt = value_tables(m, Policy(np.full((3, 2), 0.5)), 1.0)
    assert am_estimate(m, vt) == 0.0
    assert np.all(vt.q_hat == 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_backward_dp_consistency(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, num_states=5, num_actions=3, horizon=4)
    from magic_ope.mdp import sample_dataset
    data = sample_dataset(mdp, random_policy(rng, 5, 3), 30, rng)
    m = fit_mle_model(data, 5, 3, 4)
    pi = random_policy(rng, 5, 3)
    vt = value_tables(m, pi, mdp.gamma)
    assert np.all(vt.v_hat[4] == 0)
    assert np.all(vt.v_hat[:, 4] == 0) and np.all(vt.q_hat[:, 4] == 0)
    for t in range(4):
        assert np.allclose(vt.v_hat[t], np.einsum("sa,sa->s", pi.probs, vt.q_hat[t]), atol=1e-13, rtol=0)
        expect = np.einsum("sap,sap->sa", m.trans_hat, m.reward_hat + mdp.gamma * vt.v_hat[t + 1][None, None, :])
        assert np.allclose(vt.q_hat[t], expect, atol=1e-13, rtol=0)


@pytest.mark.slow
def test_am_error_shrinks_with_data(modelwin):
    medians = []
    for n in (16, 256, 4096):
        errs = []
        for k in range(128):
            data = modelwin.sample(n, np.random.default_rng([n, k]))
            m = fit_mle_model(data, 4, 2, 20)
            errs.append(abs(am_estimate(m, value_tables(m, modelwin.evaluation, 1.0)) - modelwin.true_value))
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]


def test_modelfail_model_collapses_to_one_state(modelfail):
    data = modelfail.sample(2000, np.random.default_rng(4))
    m = fit_mle_model(data, 2, 2, 2)
    non_terminal = np.nonzero(m.visit_counts.sum(axis=1))[0]
    assert list(non_terminal) == [0]
    # the model cannot tell the actions apart
    assert abs(m.trans_hat[0, 0, 0] - 0.5) < 0.05 and abs(m.trans_hat[0, 1, 0] - 0.5) < 0.05
