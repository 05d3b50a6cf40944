"""Objective functionals as term-wise breakdowns.

Every functional is reported as a loss to minimise. Available functionals:

* :func:`cai_bound`          one-step control-as-inference variational bound
* :func:`cai_plan_stage`     per-step cost of a plan under control as inference
* :func:`efe_stage`          per-step expected free energy of a plan
* :func:`aif_policy_objective`  expected free energy of a state-action policy
* :func:`likelihood_aif`     one-step functional with a biased observation likelihood
* :func:`likelihood_aif_plan_stage`  its per-step plan version

Timing: the control-as-inference stages score the belief in which action t is
taken (rewards are ``r(s_t, a_t)``), while expected free energy scores the
belief the action leads to (the observation it will produce).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .model import DiscretePOMDP, EncodingKind, ValueEncoding, check_plan
from .prob import SupportError, as_probs, kl_divergence, row_entropy
from .rollout import BeliefTrajectory, _belief, information_gain, predict_states


class FunctionalKind(enum.Enum):
    CAI_BOUND = "CaiBound"
    CAI_PLAN_STAGE = "CaiPlanStage"
    EFE_PLAN_STAGE = "EfePlanStage"
    AIF_POLICY = "AifPolicy"
    LIKELIHOOD_AIF = "LikelihoodAif"
    LIKELIHOOD_AIF_PLAN_STAGE = "LikelihoodAifPlanStage"


TERMS = ("extrinsic_value", "state_divergence", "action_divergence", "observation_ambiguity", "intrinsic_value")

APPLICABLE = {
    FunctionalKind.CAI_BOUND: {"extrinsic_value", "state_divergence", "action_divergence", "observation_ambiguity"},
    FunctionalKind.CAI_PLAN_STAGE: {"extrinsic_value", "state_divergence", "observation_ambiguity"},
    FunctionalKind.EFE_PLAN_STAGE: {"extrinsic_value", "intrinsic_value"},
    FunctionalKind.AIF_POLICY: {"extrinsic_value", "intrinsic_value", "action_divergence"},
    FunctionalKind.LIKELIHOOD_AIF: {"extrinsic_value", "state_divergence", "action_divergence"},
    FunctionalKind.LIKELIHOOD_AIF_PLAN_STAGE: {"extrinsic_value", "state_divergence"},
}

REQUIRED_ENCODING = {
    FunctionalKind.CAI_BOUND: EncodingKind.OPTIMALITY_LIKELIHOOD,
    FunctionalKind.CAI_PLAN_STAGE: EncodingKind.OPTIMALITY_LIKELIHOOD,
    FunctionalKind.EFE_PLAN_STAGE: EncodingKind.BIASED_OBSERVATION_PRIOR,
    FunctionalKind.AIF_POLICY: EncodingKind.BIASED_OBSERVATION_PRIOR,
    FunctionalKind.LIKELIHOOD_AIF: EncodingKind.BIASED_OBSERVATION_LIKELIHOOD,
    FunctionalKind.LIKELIHOOD_AIF_PLAN_STAGE: EncodingKind.BIASED_OBSERVATION_LIKELIHOOD,
}


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Per-term values (nats) of one functional.

    ``intrinsic_value`` is stored as a nonnegative magnitude and enters
    ``total`` with a minus sign; all other terms are added.
    """

    functional_kind: FunctionalKind
    extrinsic_value: float = 0.0
    state_divergence: float = 0.0
    action_divergence: float = 0.0
    observation_ambiguity: float = 0.0
    intrinsic_value: float = 0.0
    total: float = field(default=None)

    def __post_init__(self):
        kind = FunctionalKind(self.functional_kind)
        object.__setattr__(self, "functional_kind", kind)
        for name in TERMS:
            if name not in APPLICABLE[kind] and getattr(self, name) != 0.0:
                raise ValueError(f"{name} does not apply to {kind.value}")
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.total is None:
            object.__setattr__(self, "total", self.signed_sum())

    @property
    def present(self) -> frozenset:
        return frozenset(APPLICABLE[self.functional_kind])

    def signed_sum(self) -> float:
        return (self.extrinsic_value + self.state_divergence + self.action_divergence
                + self.observation_ambiguity - self.intrinsic_value)

    def __add__(self, other: "ObjectiveBreakdown") -> "ObjectiveBreakdown":
        if other.functional_kind is not self.functional_kind:
            raise ValueError("cannot add breakdowns of different functionals")
        vals = {n: getattr(self, n) + getattr(other, n) for n in TERMS}
        return ObjectiveBreakdown(self.functional_kind, total=self.total + other.total, **vals)

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["functional_kind"] = self.functional_kind.value
        d["present"] = sorted(self.present)
        return d


def _require(enc: ValueEncoding, kind: FunctionalKind):
    want = REQUIRED_ENCODING[kind]
    if enc.kind is not want:
        raise ValueError(f"{kind.value} needs a {want.value} encoding, got {enc.kind.value}")


def _policy_rows(model: DiscretePOMDP, policy) -> np.ndarray:
    rows = policy.action_dist if isinstance(policy, Policy) else as_probs(policy, "policy")
    if rows.shape != (model.num_states, model.num_actions):
        raise ValueError(f"policy rows must have shape ({model.num_states}, {model.num_actions})")
    return rows


def _action_divergence(model, q_state, rows) -> float:
    total = 0.0
    for s in np.flatnonzero(q_state > 0):
        total += q_state[s] * kl_divergence(rows[s], model.action_prior[s])
    return float(total)


def _expected_log(weights, logp, what) -> float:
    """``sum w * logp`` with ``0 * log 0 = 0``; positive weight on log 0 is a support error."""
    w = np.asarray(weights)
    live = w > 0
    if np.any(np.isneginf(logp[live])):
        raise SupportError(f"{what}: positive mass on a zero-probability outcome")
    return float(np.sum(w[live] * logp[live]))


def _state_prior(model, prev_belief, prev_action):
    b = _belief(model, prev_belief)
    return b if prev_action is None else b @ model.transition[int(prev_action)]


def _state_marginal(model, prior, q_state, pin):
    if pin or q_state is None:
        return prior
    return _belief(model, q_state)


# ----------------------------------------------------------------------------
# policies


@dataclass(frozen=True, eq=False)
class Policy:
    """State-conditional action distributions, optionally time-indexed.

    ``action_dist`` has shape (S, A) for a stationary policy or (H, S, A).
    """

    action_dist: np.ndarray

    def __post_init__(self):
        rows = as_probs(self.action_dist, "policy")
        if rows.ndim not in (2, 3):
            raise ValueError("policy must have shape (S, A) or (H, S, A)")
        object.__setattr__(self, "action_dist", rows)

    @property
    def time_indexed(self) -> bool:
        return self.action_dist.ndim == 3

    def at(self, t: int) -> np.ndarray:
        """Rows used at 1-based step ``t``."""
        return self.action_dist[t - 1] if self.time_indexed else self.action_dist

    @classmethod
    def deterministic(cls, num_states, num_actions, action) -> "Policy":
        rows = np.zeros((num_states, num_actions))
        rows[:, action] = 1.0
        return cls(rows)

    @classmethod
    def from_plan(cls, num_states, num_actions, plan) -> "Policy":
        rows = np.zeros((len(plan), num_states, num_actions))
        for t, a in enumerate(plan):
            rows[t, :, a] = 1.0
        return cls(rows)


# ----------------------------------------------------------------------------
# control as inference


def cai_bound(model: DiscretePOMDP, encoding: ValueEncoding, policy, prev_belief, prev_action=None,
              q_state=None, pin_state_marginal: bool = True) -> ObjectiveBreakdown:
    """One-step control-as-inference bound ``KL(q(s,a) || p(s,a,o,O))``.

    The state prior is ``T[prev_action]^T prev_belief`` (``prev_belief`` itself
    when ``prev_action`` is None). With ``pin_state_marginal`` the state
    marginal is set to that prior and the state divergence vanishes.
    """
    _require(encoding, FunctionalKind.CAI_BOUND)
    rows = _policy_rows(model, policy)
    prior = _state_prior(model, prev_belief, prev_action)
    q = _state_marginal(model, prior, q_state, pin_state_marginal)
    ll = encoding.optimality_loglik
    extrinsic = -float(q @ np.sum(rows * ll, axis=1))
    return ObjectiveBreakdown(
        FunctionalKind.CAI_BOUND,
        extrinsic_value=extrinsic,
        state_divergence=kl_divergence(q, prior),
        action_divergence=_action_divergence(model, q, rows),
        observation_ambiguity=float(q @ row_entropy(model.observation)),
    )


def _trajectory(model, plan, traj, initial=None):
    if traj is None:
        return predict_states(model, plan, initial)
    if tuple(traj.plan) != tuple(plan):
        raise ValueError("trajectory was computed for a different plan")
    return traj


def cai_plan_stage(model: DiscretePOMDP, encoding: ValueEncoding, plan, t: int,
                   traj: BeliefTrajectory | None = None) -> ObjectiveBreakdown:
    """Stage cost ``L_t(pi)``: extrinsic value and ambiguity of the state where ``pi_t`` is taken."""
    _require(encoding, FunctionalKind.CAI_PLAN_STAGE)
    plan = check_plan(model, plan)
    traj = _trajectory(model, plan, traj)
    b = traj.before(t)
    a = plan[t - 1]
    return ObjectiveBreakdown(
        FunctionalKind.CAI_PLAN_STAGE,
        extrinsic_value=-float(b @ encoding.optimality_loglik[:, a]),
        state_divergence=kl_divergence(b, b),
        observation_ambiguity=float(b @ row_entropy(model.observation)),
    )


# ----------------------------------------------------------------------------
# active inference


def _log_pref(encoding):
    with np.errstate(divide="ignore"):
        return np.log(encoding.biased_obs_prior)


def efe_stage(model: DiscretePOMDP, encoding: ValueEncoding, plan, t: int,
              traj: BeliefTrajectory | None = None) -> ObjectiveBreakdown:
    """Expected free energy of step ``t``: extrinsic cost minus information gain."""
    _require(encoding, FunctionalKind.EFE_PLAN_STAGE)
    plan = check_plan(model, plan)
    traj = _trajectory(model, plan, traj)
    b = traj.after(t)
    qo = b @ model.observation
    return ObjectiveBreakdown(
        FunctionalKind.EFE_PLAN_STAGE,
        extrinsic_value=-_expected_log(qo, _log_pref(encoding), "expected free energy"),
        intrinsic_value=information_gain(model, b),
    )


def aif_policy_objective(model: DiscretePOMDP, encoding: ValueEncoding, policy, q_state,
                         conditioning: str = "state_action") -> ObjectiveBreakdown:
    """Expected free energy of a state-action policy plus its action divergence.

    ``conditioning="state_action"`` takes the information gain inside the
    expectation over ``q(s) q(a|s)``, one predictive ``p(s2|s,a)`` at a time.
    ``conditioning="marginal"`` uses the single action-marginalised predictive
    ``sum_{s,a} q(s) q(a|s) p(s2|s,a)``. Both agree when ``q(s)q(a|s)`` is a
    point mass.
    """
    _require(encoding, FunctionalKind.AIF_POLICY)
    rows = _policy_rows(model, policy)
    q = _belief(model, q_state)
    joint = q[:, None] * rows  # (S, A)
    succ = np.transpose(model.transition, (1, 0, 2))  # (S, A, S2)
    predictive = np.einsum("sa,sat->t", joint, succ)
    qo = predictive @ model.observation
    extrinsic = -_expected_log(qo, _log_pref(encoding), "policy expected free energy")
    if conditioning == "marginal":
        intrinsic = information_gain(model, predictive)
    elif conditioning == "state_action":
        S, A = joint.shape
        _, ig = kernels.efe_terms(succ.reshape(S * A, -1), model.observation, np.zeros(model.num_observations))
        intrinsic = float(joint.reshape(-1) @ ig)
    else:
        raise ValueError(f"unknown conditioning {conditioning!r}")
    return ObjectiveBreakdown(
        FunctionalKind.AIF_POLICY,
        extrinsic_value=extrinsic,
        intrinsic_value=float(intrinsic),
        action_divergence=_action_divergence(model, q, rows),
    )


def _expected_biased_loglik(model, encoding, action) -> np.ndarray:
    """``sum_o p(o|s) ln p~(o|s, action)`` per state; ``-inf`` marks a support violation."""
    O = model.observation
    with np.errstate(divide="ignore", invalid="ignore"):
        logl = np.log(encoding.likelihood_for(action))
        return np.sum(np.where(O > 0, O * logl, 0.0), axis=1)


def expected_biased_loglik_table(model: DiscretePOMDP, encoding: ValueEncoding) -> np.ndarray:
    """(S, A) table of ``E_p(o|s)[ln p~(o|s,a)]``; ``-inf`` marks a support violation."""
    return np.stack([_expected_biased_loglik(model, encoding, a) for a in range(model.num_actions)], axis=1)


def likelihood_aif(model: DiscretePOMDP, encoding: ValueEncoding, policy, prev_belief, prev_action=None,
                   q_state=None, pin_state_marginal: bool = True) -> ObjectiveBreakdown:
    """One-step functional with a biased observation likelihood ``p~(o|s)``."""
    _require(encoding, FunctionalKind.LIKELIHOOD_AIF)
    rows = _policy_rows(model, policy)
    prior = _state_prior(model, prev_belief, prev_action)
    q = _state_marginal(model, prior, q_state, pin_state_marginal)
    table = expected_biased_loglik_table(model, encoding)
    extrinsic = -_expected_log((q[:, None] * rows).ravel(), table.ravel(), "likelihood-AIF")
    return ObjectiveBreakdown(
        FunctionalKind.LIKELIHOOD_AIF,
        extrinsic_value=extrinsic,
        state_divergence=kl_divergence(q, prior),
        action_divergence=_action_divergence(model, q, rows),
    )


def likelihood_aif_plan_stage(model: DiscretePOMDP, encoding: ValueEncoding, plan, t: int,
                              traj: BeliefTrajectory | None = None) -> ObjectiveBreakdown:
    _require(encoding, FunctionalKind.LIKELIHOOD_AIF_PLAN_STAGE)
    plan = check_plan(model, plan)
    traj = _trajectory(model, plan, traj)
    b = traj.before(t)
    a = plan[t - 1]
    return ObjectiveBreakdown(
        FunctionalKind.LIKELIHOOD_AIF_PLAN_STAGE,
        extrinsic_value=-_expected_log(b, _expected_biased_loglik(model, encoding, a), "likelihood-AIF"),
        state_divergence=kl_divergence(b, b),
    )


STAGE_FUNCTIONS = {
    FunctionalKind.CAI_PLAN_STAGE: cai_plan_stage,
    FunctionalKind.EFE_PLAN_STAGE: efe_stage,
    FunctionalKind.LIKELIHOOD_AIF_PLAN_STAGE: likelihood_aif_plan_stage,
}


def total_over_horizon(stage_fn, model: DiscretePOMDP, encoding: ValueEncoding, plan,
                       initial=None) -> ObjectiveBreakdown:
    """Term-wise sum of ``stage_fn`` over ``t = 1..len(plan)``."""
    if isinstance(stage_fn, (FunctionalKind, str)):
        stage_fn = STAGE_FUNCTIONS[FunctionalKind(stage_fn)]
    plan = check_plan(model, plan)
    traj = predict_states(model, plan, initial)
    out = stage_fn(model, encoding, plan, 1, traj)
    for t in range(2, len(plan) + 1):
        out = out + stage_fn(model, encoding, plan, t, traj)
    return out


# ----------------------------------------------------------------------------
# serialisation

CSV_COLUMNS = ("plan", "t", "functional_kind", "extrinsic", "state_div", "action_div", "ambiguity",
               "intrinsic", "total")


def breakdown_row(plan, t, bd: ObjectiveBreakdown) -> dict:
    return {
        "plan": " ".join(str(a) for a in plan),
        "t": t,
        "functional_kind": bd.functional_kind.value,
        "extrinsic": repr(bd.extrinsic_value),
        "state_div": repr(bd.state_divergence),
        "action_div": repr(bd.action_divergence),
        "ambiguity": repr(bd.observation_ambiguity),
        "intrinsic": repr(bd.intrinsic_value),
        "total": repr(bd.total),
    }


def write_breakdown_csv(fh, rows) -> None:
    """Write ``(plan, t, breakdown)`` triples as CSV to an open text file."""
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for plan, t, bd in rows:
        writer.writerow(breakdown_row(plan, t, bd))
