import io
import math

import numpy as np
import pytest

from aifcai import _accel, oracle
from aifcai.model import ValueEncoding, build_pomdp, encode
from aifcai.objectives import total_over_horizon
from aifcai.planners import enumerate_plans
from aifcai.rollout import predict_states

from conftest import random_model


def test_deterministic_joint_single_entry(backend):
    T = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    m = build_pomdp(T, np.eye(2), [1.0, 0.0], 2)
    j = oracle.exact_joint(m, (0, 0))
    assert np.count_nonzero(j.probs) == 1
    assert j.probs[0, 1, 0, 0, 1, 0] == 1.0


def test_horizon_one_identity(backend):
    m = build_pomdp(np.array([np.eye(2)]), np.eye(2), [0.4, 0.6], 1)
    j = oracle.exact_joint(m, (0,))
    np.testing.assert_allclose(j.state_obs(1), np.diag([0.4, 0.6]))
    assert abs(j.total() - 1.0) < 1e-12


def test_backends_agree():
    if not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    m = random_model(np.random.default_rng(1), S=3, A=2, O=2, H=3)
    args = (m.transition, m.observation, m.initial_belief, np.array([1, 0, 1]), True)
    np.testing.assert_allclose(oracle._enumerate_nb(*args), oracle._enumerate_np(*args), atol=1e-16)


def test_joint_marginals_match_rollout(backend):
    rng = np.random.default_rng(2)
    for _ in range(5):
        m = random_model(rng, S=3, A=2, O=3, H=3)
        plan = tuple(int(a) for a in rng.integers(0, 2, 3))
        j = oracle.exact_joint(m, plan)
        assert abs(j.total() - 1) < 1e-9
        traj = predict_states(m, plan)
        for t in range(1, 4):
            np.testing.assert_allclose(j.state_marginal(t), traj.after(t), atol=1e-12)


def test_joint_cap():
    m = random_model(np.random.default_rng(3), S=5, A=2, O=5, H=4)
    with pytest.raises(oracle.OracleCapError):
        oracle.exact_joint(m, (0, 0, 0, 0), cap=10**6)


def test_log_evidence_examples():
    m = build_pomdp(np.array([[[0.0, 1.0], [1.0, 0.0]]]), np.eye(2), [1.0, 0.0], 3)
    assert oracle.exact_log_evidence(m, ValueEncoding.optimality(np.zeros((2, 1))), (0, 0, 0)) == 0.0
    ev = oracle.exact_log_evidence(m, ValueEncoding.optimality(np.full((2, 1), -1.0)), (0, 0, 0))
    assert ev == pytest.approx(-3.0, abs=1e-15)


def test_log_evidence_with_and_without_observations():
    inst = oracle.random_instance(4, max_horizon=2)
    m = inst.model
    enc = encode(m, inst.cai_rewards, "OptimalityLikelihood")
    plan = (0,) * m.horizon
    a = oracle.exact_log_evidence(m, enc, plan)
    b = oracle.exact_log_evidence(m, enc, plan, with_observations=True)
    assert abs(a - b) < 1e-12 and a <= 0


@pytest.mark.parametrize("seed", range(10))
def test_evidence_below_variational_total(seed):
    inst = oracle.random_instance(seed)
    m = inst.model
    enc = encode(m, inst.cai_rewards, "OptimalityLikelihood")
    for plan in enumerate_plans(m.num_actions, m.horizon)[:20]:
        ev = oracle.exact_log_evidence(m, enc, plan)
        assert ev >= -total_over_horizon("CaiPlanStage", m, enc, tuple(plan)).total - 1e-9


def test_mutual_information_independent_is_zero():
    assert oracle.mutual_information(np.outer([0.3, 0.7], [0.5, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert oracle.mutual_information(np.diag([0.5, 0.5])) == pytest.approx(math.log(2))


def test_random_instance_protocol():
    for seed in range(30):
        inst = oracle.random_instance(seed)
        m = inst.model
        assert 2 <= m.num_states <= 5 and 2 <= m.num_actions <= 3 and 2 <= m.num_observations <= 5
        assert 1 <= m.horizon <= 4
        assert np.all(np.abs(inst.reward_sa) <= 1) and np.all(np.abs(inst.reward_obs) <= 1)
        assert oracle.random_instance(seed).model.transition.tobytes() == m.transition.tobytes()
    assert oracle.random_instance(5, mdp=True).model.is_mdp


def test_equivalence_suite_single_deterministic_instance():
    res = oracle.check_likelihood_equivalence(3)
    assert all(r.max_abs_deviation < 1e-12 for r in res)


def test_battery_and_report():
    res = oracle.verification_battery(0, 3)
    assert all(r.passed for r in res)
    buf = io.StringIO()
    oracle.write_report_csv(buf, res)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "instance_seed,check_name,max_abs_deviation,pass"
    assert len(lines) == len(res) + 1


def test_battery_detects_corruption():
    res = oracle.verification_battery(0, 2, corrupt=1e-6)
    bad = [r for r in res if not r.passed]
    assert bad and {r.check_name for r in bad} <= {"cai_bound_decomposition", "cai_bound_decomposition_pinned"}


def test_empty_battery():
    assert oracle.verification_battery(0, 0) == []
