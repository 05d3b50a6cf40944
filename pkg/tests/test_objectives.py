import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aifcai import oracle
from aifcai.envs import GO_CUE, tmaze
from aifcai.model import RewardTable, ValueEncoding, build_pomdp, encode
from aifcai.objectives import (CSV_COLUMNS, TERMS, FunctionalKind, ObjectiveBreakdown, Policy,
                               aif_policy_objective, cai_bound, cai_plan_stage, efe_stage, likelihood_aif,
                               likelihood_aif_plan_stage, total_over_horizon, write_breakdown_csv)
from aifcai.prob import SupportError, entropy, kl_divergence
from aifcai.rollout import information_gain, predict_states

from conftest import random_model


def det_mdp(S=2, A=2, H=1):
    T = np.array([np.eye(S)] * A)
    return build_pomdp(T, np.eye(S), np.full(S, 1 / S), H)


class TestBreakdown:
    def test_total_is_signed_sum(self):
        bd = ObjectiveBreakdown("EfePlanStage", extrinsic_value=2.0, intrinsic_value=0.5)
        assert bd.total == 1.5
        assert bd.present == {"extrinsic_value", "intrinsic_value"}

    def test_inapplicable_term_rejected(self):
        with pytest.raises(ValueError):
            ObjectiveBreakdown("CaiPlanStage", intrinsic_value=1.0)

    def test_add(self):
        a = ObjectiveBreakdown("CaiBound", extrinsic_value=1.0, action_divergence=0.5)
        b = a + a
        assert b.total == 3.0 and b.action_divergence == 1.0
        with pytest.raises(ValueError):
            a + ObjectiveBreakdown("EfePlanStage")

    def test_csv(self):
        buf = io.StringIO()
        write_breakdown_csv(buf, [((0, 1), 1, ObjectiveBreakdown("EfePlanStage", 1.0, intrinsic_value=0.25))])
        head, row = buf.getvalue().splitlines()
        assert head.split(",") == list(CSV_COLUMNS)
        assert row.startswith("0 1,1,EfePlanStage,1.0,")
        assert row.endswith(",0.75")


class TestCaiBound:
    def test_degenerate_all_zero(self):
        m = det_mdp()
        enc = ValueEncoding.optimality(np.zeros((2, 2)))
        bd = cai_bound(m, enc, np.full((2, 2), 0.5), [0.5, 0.5], 0)
        for name in TERMS + ("total",):
            assert getattr(bd, name) == 0.0
        direct = oracle.direct_bound(m, enc, np.full((2, 2), 0.5), [0.5, 0.5], 0)
        assert abs(direct - bd.total) < 1e-12

    def test_deterministic_policy_action_divergence(self):
        m = det_mdp()
        enc = ValueEncoding.optimality(np.zeros((2, 2)))
        bd = cai_bound(m, enc, Policy.deterministic(2, 2, 1), [0.5, 0.5])
        assert bd.action_divergence == pytest.approx(math.log(2), abs=1e-15)

    def test_random_three_state_matches_direct(self):
        rng = np.random.default_rng(20)
        m = random_model(rng, S=3, A=2, O=4)
        enc = ValueEncoding.optimality(-rng.uniform(0, 2, (3, 2)))
        rows = rng.dirichlet(np.ones(2), size=3)
        prev, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        for pin in (True, False):
            bd = cai_bound(m, enc, rows, prev, 1, q, pin)
            assert abs(bd.total - oracle.direct_bound(m, enc, rows, prev, 1, q, pin)) < 1e-9
            if pin:
                assert bd.state_divergence == 0.0

    def test_wrong_encoding(self):
        m = det_mdp()
        with pytest.raises(ValueError):
            cai_bound(m, ValueEncoding.biased_prior([0.5, 0.5]), np.full((2, 2), 0.5), [0.5, 0.5])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000))
    def test_properties(self, seed):
        inst = oracle.random_instance(seed)
        m, rng = inst.model, inst.rng
        enc = encode(m, inst.cai_rewards, "OptimalityLikelihood")
        rows = rng.dirichlet(np.ones(m.num_actions), size=m.num_states)
        prev = rng.dirichlet(np.ones(m.num_states))
        bd = cai_bound(m, enc, rows, prev, 0, rng.dirichlet(np.ones(m.num_states)), pin_state_marginal=False)
        assert min(bd.state_divergence, bd.action_divergence, bd.observation_ambiguity) >= -1e-12
        assert abs(bd.total - bd.signed_sum()) < 1e-12
        q = prev @ m.transition[0]
        pinned = cai_bound(m, enc, rows, prev, 0)
        expect = math.log(m.num_actions) - sum(q[s] * entropy(rows[s]) for s in range(m.num_states))
        assert abs(pinned.action_divergence - expect) < 1e-12


class TestCaiPlanStage:
    def test_zero_rewards_deterministic_obs(self):
        m = det_mdp(H=2)
        enc = ValueEncoding.optimality(np.zeros((2, 2)))
        assert total_over_horizon("CaiPlanStage", m, enc, (0, 1)).total == 0.0

    def test_mdp_is_expected_shifted_reward(self):
        rng = np.random.default_rng(21)
        m = random_model(rng, S=3, A=2, H=2, mdp=True)
        enc = ValueEncoding.optimality(-rng.uniform(0, 1, (3, 2)))
        traj = predict_states(m, (1, 0))
        bd = cai_plan_stage(m, enc, (1, 0), 2, traj)
        assert bd.observation_ambiguity == 0.0
        assert bd.total == pytest.approx(-(traj.before(2) @ enc.optimality_loglik[:, 0]), abs=1e-15)

    def test_tmaze_step_two_matches_enumeration(self):
        env = tmaze()
        enc = env.encoding("CaiPlanStage")
        plan = (GO_CUE, 0, 0, 3)
        for t in (1, 2, 3, 4):
            got = cai_plan_stage(env.pomdp, enc, plan, t).total
            assert abs(got - oracle.direct_cai_plan_cost(env.pomdp, enc, plan, t)) < 1e-9

    def test_trajectory_plan_mismatch(self):
        m = det_mdp(H=2)
        enc = ValueEncoding.optimality(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            cai_plan_stage(m, enc, (0, 0), 1, predict_states(m, (1, 1)))


class TestEfeStage:
    def test_uninformative_uniform_preference(self):
        m = build_pomdp(np.array([np.eye(2)]), np.full((2, 3), 1 / 3), [0.5, 0.5], 1)
        bd = efe_stage(m, ValueEncoding.biased_prior(np.full(3, 1 / 3)), (0,), 1)
        assert bd.total == pytest.approx(math.log(3), abs=1e-15)
        assert bd.intrinsic_value == 0.0

    def test_mdp_kl_control(self):
        rng = np.random.default_rng(22)
        m = random_model(rng, S=4, A=3, H=3, mdp=True)
        pref = rng.dirichlet(np.ones(4))
        enc = ValueEncoding.biased_prior(pref)
        plan = (2, 0, 1)
        traj = predict_states(m, plan)
        for t in (1, 2, 3):
            assert abs(efe_stage(m, enc, plan, t, traj).total - kl_divergence(traj.after(t), pref)) < 1e-12

    def test_tmaze_cue_step_intrinsic(self):
        env = tmaze()
        m = env.pomdp
        plan = (GO_CUE, 0, 0, 0)
        bd = efe_stage(m, env.encoding("EfePlanStage"), plan, 1)
        mi = oracle.mutual_information(oracle.step_joint(m, plan, 1))
        assert abs(bd.intrinsic_value - mi) < 1e-12
        assert bd.intrinsic_value == pytest.approx(math.log(2))

    def test_zero_preference_support_error(self):
        m = build_pomdp(np.array([np.eye(2)]), np.eye(2), [0.5, 0.5], 1)
        with pytest.raises(SupportError):
            efe_stage(m, ValueEncoding.biased_prior([1.0, 0.0]), (0,), 1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000))
    def test_decomposition(self, seed):
        inst = oracle.random_instance(seed)
        m = inst.model
        enc = encode(m, inst.aif_rewards, "BiasedObservationPrior")
        plan = tuple(int(a) for a in inst.rng.integers(0, m.num_actions, m.horizon))
        for t in range(1, m.horizon + 1):
            bd = efe_stage(m, enc, plan, t)
            assert abs(bd.total - oracle.direct_efe(m, enc.biased_obs_prior, plan, t)) < 1e-9
            assert bd.intrinsic_value >= 0.0


class TestAifPolicy:
    def test_prior_policy_matches_plan_style_efe(self):
        rng = np.random.default_rng(23)
        m = random_model(rng, S=3, A=2, O=3)
        enc = ValueEncoding.biased_prior(rng.dirichlet(np.ones(3)))
        q = rng.dirichlet(np.ones(3))
        bd = aif_policy_objective(m, enc, m.action_prior, q, conditioning="marginal")
        assert bd.action_divergence == 0.0
        pred = np.einsum("s,sa,ast->t", q, m.action_prior, m.transition)
        expect = -(pred @ m.observation @ np.log(enc.biased_obs_prior)) - information_gain(m, pred)
        assert abs(bd.total - expect) < 1e-12

    def test_deterministic_policy_three_actions(self):
        m = det_mdp(S=2, A=3)
        bd = aif_policy_objective(m, ValueEncoding.biased_prior([0.5, 0.5]), Policy.deterministic(2, 3, 0),
                                  [0.5, 0.5])
        assert bd.action_divergence == pytest.approx(math.log(3), abs=1e-15)

    def test_conditionings_agree_on_point_mass(self):
        rng = np.random.default_rng(24)
        m = random_model(rng, S=3, A=2, O=3)
        enc = ValueEncoding.biased_prior(rng.dirichlet(np.ones(3)))
        a = aif_policy_objective(m, enc, Policy.deterministic(3, 2, 1), [0, 1, 0])
        b = aif_policy_objective(m, enc, Policy.deterministic(3, 2, 1), [0, 1, 0], conditioning="marginal")
        assert a.total == pytest.approx(b.total, abs=1e-14)
        with pytest.raises(ValueError):
            aif_policy_objective(m, enc, m.action_prior, [0, 1, 0], conditioning="other")

    @pytest.mark.parametrize("seed", range(10))
    def test_random_mdp_matches_enumeration(self, seed):
        inst = oracle.random_instance(seed, mdp=True, nonuniform_action_prior=True)
        m, rng = inst.model, inst.rng
        enc = encode(m, inst.aif_rewards, "BiasedObservationPrior")
        rows = rng.dirichlet(np.ones(m.num_actions), size=m.num_states)
        q = rng.dirichlet(np.ones(m.num_states))
        got = aif_policy_objective(m, enc, rows, q).total
        assert abs(got - oracle.direct_aif_policy(m, enc.biased_obs_prior, rows, q)) < 1e-9


class TestLikelihoodAif:
    def test_uniform_likelihood(self):
        rng = np.random.default_rng(25)
        m = random_model(rng, S=3, A=2, O=4)
        enc = ValueEncoding.biased_likelihood(np.full((3, 4), 0.25))
        bd = likelihood_aif(m, enc, m.action_prior, rng.dirichlet(np.ones(3)))
        assert bd.extrinsic_value == pytest.approx(math.log(4), abs=1e-14)

    def test_zero_reward_mdp_is_action_divergence(self):
        m = det_mdp(S=3, A=2)
        enc = encode(m, RewardTable(state_action=np.zeros((3, 2))), "BiasedObservationLikelihood")
        rows = np.array([[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]])
        bd = likelihood_aif(m, enc, rows, [0.2, 0.3, 0.5])
        assert bd.extrinsic_value == 0.0
        assert bd.total == bd.action_divergence > 0

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_cai_on_mdp(self, seed):
        inst = oracle.random_instance(seed, mdp=True, nonuniform_action_prior=True)
        m, rng = inst.model, inst.rng
        cai = encode(m, inst.cai_rewards, "OptimalityLikelihood")
        lik = encode(m, inst.cai_rewards, "BiasedObservationLikelihood")
        rows = rng.dirichlet(np.ones(m.num_actions), size=m.num_states)
        prev, q = rng.dirichlet(np.ones(m.num_states)), rng.dirichlet(np.ones(m.num_states))
        for pin in (True, False):
            a = cai_bound(m, cai, rows, prev, 0, q, pin)
            b = likelihood_aif(m, lik, rows, prev, 0, q, pin)
            for name in TERMS + ("total",):
                assert abs(getattr(a, name) - getattr(b, name)) < 1e-9
        plan = tuple(int(x) for x in rng.integers(0, m.num_actions, m.horizon))
        for t in range(1, m.horizon + 1):
            assert abs(cai_plan_stage(m, cai, plan, t).total - likelihood_aif_plan_stage(m, lik, plan, t).total) < 1e-12


class TestTotalOverHorizon:
    def test_horizon_one_is_single_stage(self):
        env = tmaze(horizon=1)
        enc = env.encoding("EfePlanStage")
        assert total_over_horizon(efe_stage, env.pomdp, enc, (GO_CUE,)) == efe_stage(env.pomdp, enc, (GO_CUE,), 1)

    def test_zero_reward_deterministic(self):
        m = det_mdp(H=3)
        assert total_over_horizon("CaiPlanStage", m, ValueEncoding.optimality(np.zeros((2, 2))), (0, 1, 0)).total == 0

    def test_tmaze_two_step_plans(self):
        env = tmaze(horizon=2)
        m = env.pomdp
        cai, aif = env.encoding("CaiPlanStage"), env.encoding("EfePlanStage")
        for plan in [(a, b) for a in range(4) for b in range(4)]:
            c = total_over_horizon("CaiPlanStage", m, cai, plan).total
            e = total_over_horizon("EfePlanStage", m, aif, plan).total
            assert abs(c - sum(oracle.direct_cai_plan_cost(m, cai, plan, t) for t in (1, 2))) < 1e-9
            assert abs(e - sum(oracle.direct_efe(m, aif.biased_obs_prior, plan, t) for t in (1, 2))) < 1e-9
