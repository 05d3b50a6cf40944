"""Plan posteriors, action selection and soft policies.

Plans are enumerated exhaustively and scored in batch by the kernels in
:mod:`aifcai.kernels`; the posterior is ``softmax(ln p(pi) - sum_t cost_t(pi))``.
Policies for MDPs are computed by an exact finite-horizon soft backward
recursion.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .model import DiscretePOMDP, EncodingKind, ValueEncoding, is_mdp
from .objectives import (
    REQUIRED_ENCODING,
    FunctionalKind,
    ObjectiveBreakdown,
    Policy,
    aif_policy_objective,
    cai_bound,
    expected_biased_loglik_table,
)
from .prob import Categorical, SupportError, as_probs, row_entropy
from .rollout import _belief

DEFAULT_ENUM_CAP = 100_000
ENUM_CAP_ENV = "ICL_ENUM_CAP"
TIE_TOL = 1e-12

PLAN_KINDS = (
    FunctionalKind.CAI_PLAN_STAGE,
    FunctionalKind.EFE_PLAN_STAGE,
    FunctionalKind.LIKELIHOOD_AIF_PLAN_STAGE,
)


class EnumerationCapError(RuntimeError):
    pass


def enumeration_cap() -> int:
    raw = os.environ.get(ENUM_CAP_ENV)
    return DEFAULT_ENUM_CAP if not raw else int(raw)


def enumerate_plans(num_actions: int, horizon: int, cap: int | None = None) -> np.ndarray:
    """All ``num_actions ** horizon`` plans in lexicographic order, shape (P, H)."""
    if num_actions < 1 or horizon < 1:
        raise ValueError("num_actions and horizon must be >= 1")
    cap = enumeration_cap() if cap is None else cap
    count = num_actions ** horizon
    if count > cap:
        raise EnumerationCapError(f"{num_actions}^{horizon} = {count} plans exceeds the cap of {cap}")
    return np.indices((num_actions,) * horizon).reshape(horizon, -1).T.astype(np.int64)


# ----------------------------------------------------------------------------
# batched stage terms


@dataclass(frozen=True, eq=False)
class StageTerms:
    """Per-plan, per-step term arrays of shape (P, H)."""

    kind: FunctionalKind
    extrinsic: np.ndarray
    ambiguity: np.ndarray
    intrinsic: np.ndarray

    @property
    def stage_totals(self) -> np.ndarray:
        return self.extrinsic + self.ambiguity - self.intrinsic

    @property
    def totals(self) -> np.ndarray:
        return self.stage_totals.sum(axis=1)

    def breakdown(self, i: int, t: int | None = None) -> ObjectiveBreakdown:
        """Breakdown of plan ``i`` at 1-based step ``t``, or summed over steps."""
        sl = slice(None) if t is None else t - 1
        ext = float(np.sum(self.extrinsic[i, sl]))
        amb = float(np.sum(self.ambiguity[i, sl]))
        intr = float(np.sum(self.intrinsic[i, sl]))
        if self.kind is FunctionalKind.EFE_PLAN_STAGE:
            return ObjectiveBreakdown(self.kind, extrinsic_value=ext, intrinsic_value=intr)
        if self.kind is FunctionalKind.CAI_PLAN_STAGE:
            return ObjectiveBreakdown(self.kind, extrinsic_value=ext, observation_ambiguity=amb)
        return ObjectiveBreakdown(self.kind, extrinsic_value=ext)


def _checked_expectation(pre, acts, table, what):
    """``-E_b[table[s, a]]`` with a support check on ``-inf`` entries."""
    bad = np.isneginf(table)
    if np.any(bad):
        if np.any((pre > 0) & bad[:, acts].T):
            raise SupportError(f"{what}: positive mass on a zero-probability outcome")
        table = np.where(bad, 0.0, table)
    return kernels.sa_expect(pre, acts, table)


def stage_terms(model: DiscretePOMDP, encoding: ValueEncoding, kind, plans, initial=None) -> StageTerms:
    kind = FunctionalKind(kind)
    if kind not in PLAN_KINDS:
        raise ValueError(f"{kind.value} is not a plan functional")
    want = REQUIRED_ENCODING[kind]
    if encoding.kind is not want:
        raise ValueError(f"{kind.value} needs a {want.value} encoding")
    plans = np.asarray(plans, dtype=np.int64)
    if plans.ndim != 2 or np.any(plans < 0) or np.any(plans >= model.num_actions):
        raise IndexError("plans must be a (P, H) array of valid action indices")
    b0 = model.initial_belief if initial is None else _belief(model, initial)
    beliefs = kernels.rollout(model.transition, b0, plans)
    P, H = plans.shape
    S = model.num_states
    zeros = np.zeros((P, H))
    acts = plans.reshape(-1)
    if kind is FunctionalKind.EFE_PLAN_STAGE:
        post = beliefs[:, 1:].reshape(-1, S)
        with np.errstate(divide="ignore"):
            log_pref = np.log(encoding.biased_obs_prior)
        ext, ig = kernels.efe_terms(post, model.observation, log_pref)
        if np.any(np.isinf(ext)):
            raise SupportError("expected free energy: predicted observation has zero preference")
        return StageTerms(kind, ext.reshape(P, H), zeros, ig.reshape(P, H))
    pre = beliefs[:, :-1].reshape(-1, S)
    if kind is FunctionalKind.CAI_PLAN_STAGE:
        ext = -kernels.sa_expect(pre, acts, encoding.optimality_loglik)
        amb = pre @ row_entropy(model.observation)
        return StageTerms(kind, ext.reshape(P, H), amb.reshape(P, H), zeros)
    table = expected_biased_loglik_table(model, encoding)
    ext = -_checked_expectation(pre, acts, table, "likelihood-AIF")
    return StageTerms(kind, ext.reshape(P, H), zeros, zeros)


# ----------------------------------------------------------------------------
# plan posterior


@dataclass(frozen=True, eq=False)
class PlanPosterior:
    kind: FunctionalKind
    plans: np.ndarray
    log_prior: np.ndarray
    terms: StageTerms
    log_weights: np.ndarray
    probs: np.ndarray
    log_partition: float

    @property
    def totals(self) -> np.ndarray:
        return self.terms.totals

    @property
    def num_actions(self) -> int:
        return int(self.plans.max()) + 1

    def first_action_marginal(self, num_actions: int | None = None) -> np.ndarray:
        n = self.num_actions if num_actions is None else num_actions
        return np.bincount(self.plans[:, 0], weights=self.probs, minlength=n)

    def map_index(self) -> int:
        return _argmax_low(self.probs)

    def map_plan(self) -> tuple:
        return tuple(int(a) for a in self.plans[self.map_index()])

    def entropy(self) -> float:
        return float(np.sum(special.entr(self.probs)))

    def bound(self, q) -> float:
        """``KL(q || prior * exp(-total))``; equals ``-log_partition`` at the posterior."""
        q = as_probs(q, "plan distribution")
        live = q > 0
        return float(np.sum(q[live] * (np.log(q[live]) - self.log_weights[live])))

    def breakdown(self, i: int, t: int | None = None) -> ObjectiveBreakdown:
        return self.terms.breakdown(i, t)


def _argmax_low(x) -> int:
    x = np.asarray(x)
    return int(np.flatnonzero(x >= x.max() - TIE_TOL)[0])


def plan_posterior(model: DiscretePOMDP, encoding: ValueEncoding, kind, plan_prior=None,
                   initial=None, horizon: int | None = None, cap: int | None = None) -> PlanPosterior:
    """Softmax posterior over all plans of length ``horizon`` (default: the model's)."""
    kind = FunctionalKind(kind)
    H = model.horizon if horizon is None else int(horizon)
    plans = enumerate_plans(model.num_actions, H, cap)
    if plan_prior is None:
        log_prior = np.full(len(plans), -np.log(len(plans)))
    else:
        prior = plan_prior.probs if isinstance(plan_prior, Categorical) else as_probs(plan_prior, "plan prior")
        if prior.shape != (len(plans),):
            raise ValueError(f"plan prior must have {len(plans)} entries")
        with np.errstate(divide="ignore"):
            log_prior = np.log(prior)
    terms = stage_terms(model, encoding, kind, plans, initial)
    log_weights = log_prior - terms.totals
    log_z = float(special.logsumexp(log_weights))
    probs = np.exp(log_weights - log_z)
    return PlanPosterior(kind, plans, log_prior, terms, log_weights, probs, log_z)


class SelectMode(enum.Enum):
    FIRST_ACTION_MARGINAL = "FirstActionMarginal-Argmax"
    MAP_PLAN = "MAP-Plan"

    @classmethod
    def parse(cls, value) -> "SelectMode":
        if isinstance(value, cls):
            return value
        aliases = {"marginal": cls.FIRST_ACTION_MARGINAL, "map": cls.MAP_PLAN}
        return aliases.get(str(value).lower()) or cls(value)


def select_action(pp: PlanPosterior, mode=SelectMode.FIRST_ACTION_MARGINAL) -> int:
    """Pick an action from a plan posterior; ties go to the lowest index."""
    mode = SelectMode.parse(mode)
    if mode is SelectMode.MAP_PLAN:
        return int(pp.plans[pp.map_index(), 0])
    return _argmax_low(pp.first_action_marginal())


# ----------------------------------------------------------------------------
# soft policies on MDPs


@dataclass(frozen=True, eq=False)
class SoftPolicy:
    policy: Policy  # time-indexed, (H, S, A)
    q_values: np.ndarray  # (H, S, A)
    values: np.ndarray  # (H+1, S)

    def optimal_value(self, initial) -> float:
        """Minimised horizon-summed functional: ``-E_initial[V_1]``."""
        return -float(np.asarray(initial) @ self.values[0])


def _log_action_prior(model):
    with np.errstate(divide="ignore"):
        return np.log(model.action_prior)


def soft_policy_backward(model: DiscretePOMDP, encoding: ValueEncoding) -> SoftPolicy:
    """Exact minimiser of the horizon-summed control-as-inference bound on an MDP."""
    if not is_mdp(model):
        raise ValueError("soft_policy_backward requires an MDP")
    if encoding.kind is not EncodingKind.OPTIMALITY_LIKELIHOOD:
        raise ValueError("soft_policy_backward needs an OptimalityLikelihood encoding")
    Q, V, pol = kernels.soft_backward(model.transition, encoding.optimality_loglik,
                                      _log_action_prior(model), model.horizon)
    return SoftPolicy(Policy(pol), Q, V)


def aif_stage_log_potential(model: DiscretePOMDP, encoding: ValueEncoding) -> np.ndarray:
    """(S, A) table ``-(extrinsic - information gain)`` of the successor ``p(.|s,a)``.

    On an MDP this equals ``-KL(p(.|s,a) || p~)``.
    """
    S, A = model.num_states, model.num_actions
    succ = np.transpose(model.transition, (1, 0, 2)).reshape(S * A, S)
    with np.errstate(divide="ignore"):
        log_pref = np.log(encoding.biased_obs_prior)
    ext, ig = kernels.efe_terms(succ, model.observation, log_pref)
    if np.any(np.isinf(ext)):
        raise SupportError("an action leads to an observation with zero preference")
    return -(ext - ig).reshape(S, A)


def aif_policy_backward(model: DiscretePOMDP, encoding: ValueEncoding) -> SoftPolicy:
    """Exact minimiser of the horizon-summed state-action-conditioned EFE on an MDP."""
    if not is_mdp(model):
        raise ValueError("aif_policy_backward requires an MDP")
    if encoding.kind is not EncodingKind.BIASED_OBSERVATION_PRIOR:
        raise ValueError("aif_policy_backward needs a BiasedObservationPrior encoding")
    stage = aif_stage_log_potential(model, encoding)
    Q, V, pol = kernels.soft_backward(model.transition, stage, _log_action_prior(model), model.horizon)
    return SoftPolicy(Policy(pol), Q, V)


def policy_functional(model: DiscretePOMDP, encoding: ValueEncoding, policy, kind, initial=None) -> ObjectiveBreakdown:
    """Horizon-summed one-step functional of a (time-indexed) policy.

    State marginals are propagated under the policy and pinned at every step,
    so the state divergence is zero. ``kind`` is ``CaiBound`` or ``AifPolicy``.
    """
    kind = FunctionalKind(kind)
    if isinstance(policy, SoftPolicy):
        policy = policy.policy
    if not isinstance(policy, Policy):
        policy = Policy(policy)
    q = model.initial_belief if initial is None else _belief(model, initial)
    out = None
    for t in range(1, model.horizon + 1):
        rows = policy.at(t)
        if kind is FunctionalKind.CAI_BOUND:
            bd = cai_bound(model, encoding, rows, q, None, q, pin_state_marginal=False)
        elif kind is FunctionalKind.AIF_POLICY:
            bd = aif_policy_objective(model, encoding, rows, q, conditioning="state_action")
        else:
            raise ValueError(f"{kind.value} is not a policy functional")
        out = bd if out is None else out + bd
        q = as_probs(np.einsum("s,sa,ast->t", q, rows, model.transition), "propagated belief")
    return out
