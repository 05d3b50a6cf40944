"""Generative world models and the rival encodings of value.

A :class:`DiscretePOMDP` holds the agent's categorical model. Value enters it
in one of three ways (:class:`EncodingKind`): as an optimality likelihood
``p(O=1|s,a) = exp(r(s,a))`` (control as inference), as a biased prior over
observations ``p~(o) ∝ exp(r(o))`` (active inference), or as a biased
observation likelihood ``p~(o|s)`` (likelihood active inference).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .prob import Categorical, DimensionError, ProbabilityError, as_probs

Plan = tuple  # fixed open-loop action sequence, one action index per step


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscretePOMDP:
    """Categorical POMDP.

    Attributes
    ----------
    transition : ndarray, shape (A, S, S)
        ``transition[a, s, s2] = p(s2 | s, a)``.
    observation : ndarray, shape (S, O)
        ``observation[s, o] = p(o | s)``.
    initial_belief : ndarray, shape (S,)
        Belief over the state in which the first planned action is taken.
    action_prior : ndarray, shape (S, A)
        ``p(a | s)``; uniform unless given.
    horizon : int
        Planning horizon ``T >= 1``.
    """

    transition: np.ndarray
    observation: np.ndarray
    initial_belief: np.ndarray
    action_prior: np.ndarray | None = None
    horizon: int = 1

    def __post_init__(self):
        T = as_probs(self.transition, "transition")
        O = as_probs(self.observation, "observation")
        b0 = as_probs(self.initial_belief, "initial_belief")
        if T.ndim != 3 or T.shape[1] != T.shape[2]:
            raise DimensionError(f"transition must have shape (A, S, S), got {T.shape}")
        A, S, _ = T.shape
        if O.ndim != 2 or O.shape[0] != S:
            raise DimensionError(f"observation must have shape ({S}, O), got {O.shape}")
        if b0.shape != (S,):
            raise DimensionError(f"initial_belief must have shape ({S},), got {b0.shape}")
        if self.action_prior is None:
            prior = np.full((S, A), 1.0 / A)
            prior.setflags(write=False)
        else:
            prior = as_probs(self.action_prior, "action_prior")
            if prior.shape != (S, A):
                raise DimensionError(f"action_prior must have shape ({S}, {A}), got {prior.shape}")
        horizon = int(self.horizon)
        if horizon < 1:
            raise ModelError("horizon must be >= 1")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "observation", O)
        object.__setattr__(self, "initial_belief", b0)
        object.__setattr__(self, "action_prior", prior)
        object.__setattr__(self, "horizon", horizon)

    @property
    def num_states(self) -> int:
        return self.transition.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def num_observations(self) -> int:
        return self.observation.shape[1]

    @property
    def is_mdp(self) -> bool:
        return is_mdp(self)

    def with_(self, **changes) -> "DiscretePOMDP":
        fields = dict(
            transition=self.transition,
            observation=self.observation,
            initial_belief=self.initial_belief,
            action_prior=self.action_prior,
            horizon=self.horizon,
        )
        fields.update(changes)
        return DiscretePOMDP(**fields)


def build_pomdp(transition, observation, initial_belief, horizon, action_prior=None) -> DiscretePOMDP:
    return DiscretePOMDP(
        transition=transition,
        observation=observation,
        initial_belief=initial_belief,
        action_prior=action_prior,
        horizon=horizon,
    )


def is_mdp(model: DiscretePOMDP) -> bool:
    """True iff observations are the identity map on states."""
    O = model.observation
    return O.shape[0] == O.shape[1] and bool(np.array_equal(O, np.eye(O.shape[0])))


def check_plan(model: DiscretePOMDP, plan, horizon: int | None = None) -> Plan:
    plan = tuple(int(a) for a in plan)
    if len(plan) < 1:
        raise ModelError("plan must contain at least one action")
    if horizon is not None and len(plan) != horizon:
        raise ModelError(f"plan length {len(plan)} != horizon {horizon}")
    for a in plan:
        if not 0 <= a < model.num_actions:
            raise IndexError(f"action {a} out of range for {model.num_actions} actions")
    return plan


# ----------------------------------------------------------------------------
# rewards


@dataclass(frozen=True, eq=False)
class RewardTable:
    """Rewards over state-action pairs, observations, or both."""

    state_action: np.ndarray | None = None
    observation: np.ndarray | None = None

    def __post_init__(self):
        if self.state_action is None and self.observation is None:
            raise ModelError("RewardTable needs state_action and/or observation rewards")
        for name in ("state_action", "observation"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.array(v, dtype=np.float64)
            if v.size == 0:
                raise ModelError(f"{name} reward table is empty")
            if not np.all(np.isfinite(v)):
                raise ModelError(f"{name} rewards must be finite")
            if name == "state_action" and v.ndim != 2:
                raise DimensionError("state_action rewards must be a matrix r[s][a]")
            if name == "observation" and v.ndim != 1:
                raise DimensionError("observation rewards must be a vector r[o]")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def shifted(self, c: float) -> "RewardTable":
        return RewardTable(
            None if self.state_action is None else self.state_action + c,
            None if self.observation is None else self.observation + c,
        )

    def check_against(self, model: DiscretePOMDP) -> None:
        S, A, O = model.num_states, model.num_actions, model.num_observations
        if self.state_action is not None and self.state_action.shape != (S, A):
            raise DimensionError(f"state_action rewards must have shape ({S}, {A})")
        if self.observation is not None and self.observation.shape != (O,):
            raise DimensionError(f"observation rewards must have shape ({O},)")
        if self.state_action is not None and self.observation is not None and is_mdp(model):
            converted = state_action_reward_from_observation(model, self.observation)
            if not np.allclose(converted, self.state_action, atol=1e-9, rtol=0):
                raise ModelError("state_action and observation rewards are inconsistent")

    def state_action_for(self, model: DiscretePOMDP) -> np.ndarray:
        if self.state_action is not None:
            return self.state_action
        return state_action_reward_from_observation(model, self.observation)


def state_action_reward_from_observation(model: DiscretePOMDP, obs_reward) -> np.ndarray:
    """Expected observation reward of the outcome of taking ``a`` in ``s``.

    ``r(s, a) = sum_{s2} p(s2|s,a) sum_o p(o|s2) r(o)``
    """
    r = np.asarray(obs_reward, dtype=np.float64)
    per_state = model.observation @ r
    return np.einsum("ast,t->sa", model.transition, per_state)


def optimality_loglik(rewards, model: DiscretePOMDP | None = None) -> np.ndarray:
    """``ln p(O=1|s,a)``: state-action rewards shifted so the maximum is 0."""
    if isinstance(rewards, RewardTable):
        if rewards.state_action is None and model is None:
            raise ModelError("observation-only rewards need a model to convert")
        r = rewards.state_action if model is None else rewards.state_action_for(model)
    else:
        r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ModelError("empty reward table")
    out = r - r.max()
    out.setflags(write=False)
    return out


def biased_observation_prior(rewards) -> Categorical:
    """``p~(o) = softmax(r(o))``."""
    r = rewards.observation if isinstance(rewards, RewardTable) else rewards
    if r is None:
        raise ModelError("observation rewards are required for a biased prior")
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        raise ModelError("empty reward table")
    return Categorical(special.softmax(r))


def biased_observation_likelihood(model: DiscretePOMDP, target_loglik) -> np.ndarray:
    """Row-wise softmax of a target log-likelihood.

    ``target_loglik`` has shape (S, O) for an action-independent likelihood or
    (A, S, O) for one likelihood per evaluated action.
    """
    t = np.asarray(target_loglik, dtype=np.float64)
    S, O = model.num_states, model.num_observations
    if t.shape not in ((S, O), (model.num_actions, S, O)):
        raise DimensionError(f"target log-likelihood must be ({S}, {O}) or (A, {S}, {O})")
    if np.any(np.isnan(t)) or np.any(t == np.inf):
        raise ProbabilityError("target log-likelihood contains NaN or +inf")
    if np.any(np.all(t == -np.inf, axis=-1)):
        raise ProbabilityError("a target log-likelihood row is entirely -inf")
    out = special.softmax(t, axis=-1)
    out.setflags(write=False)
    return out


def matched_likelihood_target(model: DiscretePOMDP, loglik) -> np.ndarray:
    """Target with ``ln p~(o=s|s, a) = ln p(O|s,a)`` on an MDP.

    The remaining mass ``1 - p(O|s,a)`` is spread evenly over the other
    observations so each row is already normalised.
    """
    if not is_mdp(model):
        raise ModelError("the matched likelihood target is defined on MDPs only")
    ll = np.asarray(loglik, dtype=np.float64)
    S, A = model.num_states, model.num_actions
    if S < 2:
        raise ModelError("need at least two observations")
    with np.errstate(divide="ignore"):
        rest = np.log1p(-np.exp(ll)) - np.log(S - 1)  # -inf where p(O|s,a) == 1
    target = np.empty((A, S, S))
    for a in range(A):
        target[a] = rest[:, a][:, None]
        target[a][np.diag_indices(S)] = ll[:, a]
    return target


# ----------------------------------------------------------------------------
# value encodings


class EncodingKind(enum.Enum):
    OPTIMALITY_LIKELIHOOD = "OptimalityLikelihood"
    BIASED_OBSERVATION_PRIOR = "BiasedObservationPrior"
    BIASED_OBSERVATION_LIKELIHOOD = "BiasedObservationLikelihood"


_REQUIRED = {
    EncodingKind.OPTIMALITY_LIKELIHOOD: "optimality_loglik",
    EncodingKind.BIASED_OBSERVATION_PRIOR: "biased_obs_prior",
    EncodingKind.BIASED_OBSERVATION_LIKELIHOOD: "biased_obs_likelihood",
}


@dataclass(frozen=True, eq=False)
class ValueEncoding:
    kind: EncodingKind
    optimality_loglik: np.ndarray | None = None
    biased_obs_prior: np.ndarray | None = None
    biased_obs_likelihood: np.ndarray | None = None

    def __post_init__(self):
        kind = EncodingKind(self.kind)
        object.__setattr__(self, "kind", kind)
        for k, name in _REQUIRED.items():
            present = getattr(self, name) is not None
            if present != (k is kind):
                raise ModelError(f"{kind.value} encoding requires exactly the field {_REQUIRED[kind]}")
        if kind is EncodingKind.OPTIMALITY_LIKELIHOOD:
            ll = np.array(self.optimality_loglik, dtype=np.float64)
            if ll.ndim != 2 or not np.all(np.isfinite(ll)):
                raise ModelError("optimality log-likelihood must be a finite matrix")
            if np.any(ll > 0):
                raise ModelError("optimality log-likelihood entries must be <= 0")
            ll.setflags(write=False)
            object.__setattr__(self, "optimality_loglik", ll)
        elif kind is EncodingKind.BIASED_OBSERVATION_PRIOR:
            object.__setattr__(self, "biased_obs_prior", as_probs(self.biased_obs_prior, "biased_obs_prior"))
        else:
            rows = as_probs(self.biased_obs_likelihood, "biased_obs_likelihood")
            if rows.ndim not in (2, 3):
                raise DimensionError("biased likelihood must be (S, O) or (A, S, O)")
            object.__setattr__(self, "biased_obs_likelihood", rows)

    @classmethod
    def optimality(cls, loglik) -> "ValueEncoding":
        return cls(EncodingKind.OPTIMALITY_LIKELIHOOD, optimality_loglik=loglik)

    @classmethod
    def biased_prior(cls, prior) -> "ValueEncoding":
        return cls(EncodingKind.BIASED_OBSERVATION_PRIOR, biased_obs_prior=np.asarray(prior))

    @classmethod
    def biased_likelihood(cls, rows) -> "ValueEncoding":
        return cls(EncodingKind.BIASED_OBSERVATION_LIKELIHOOD, biased_obs_likelihood=rows)

    def likelihood_for(self, action: int) -> np.ndarray:
        rows = self.biased_obs_likelihood
        return rows if rows.ndim == 2 else rows[action]


def encode(model: DiscretePOMDP, rewards: RewardTable, kind) -> ValueEncoding:
    """Build the encoding of ``kind`` from a reward table."""
    kind = EncodingKind(kind)
    if kind is EncodingKind.OPTIMALITY_LIKELIHOOD:
        return ValueEncoding.optimality(optimality_loglik(rewards, model))
    if kind is EncodingKind.BIASED_OBSERVATION_PRIOR:
        return ValueEncoding.biased_prior(biased_observation_prior(rewards).probs)
    ll = optimality_loglik(rewards, model)
    return ValueEncoding.biased_likelihood(
        biased_observation_likelihood(model, matched_likelihood_target(model, ll)))


# ----------------------------------------------------------------------------
# JSON model files

_REQUIRED_KEYS = ("states", "actions", "observations", "horizon", "transition", "observation", "initial_belief")


def _count(value, key):
    if isinstance(value, int):
        return value, [str(i) for i in range(value)]
    if isinstance(value, list):
        return len(value), [str(v) for v in value]
    raise ModelError(f"'{key}' must be a count or a list of labels")


@dataclass(frozen=True)
class ModelSpec:
    model: DiscretePOMDP
    rewards: RewardTable | None
    labels: dict = field(default_factory=dict)


def model_from_dict(doc: dict) -> ModelSpec:
    missing = [k for k in _REQUIRED_KEYS if k not in doc]
    if missing:
        raise ModelError(f"model file is missing keys: {', '.join(missing)}")
    S, s_labels = _count(doc["states"], "states")
    A, a_labels = _count(doc["actions"], "actions")
    O, o_labels = _count(doc["observations"], "observations")
    model = build_pomdp(
        transition=doc["transition"],
        observation=doc["observation"],
        initial_belief=doc["initial_belief"],
        horizon=doc["horizon"],
        action_prior=doc.get("action_prior"),
    )
    if (model.num_states, model.num_actions, model.num_observations) != (S, A, O):
        raise DimensionError("declared sizes do not match the tables")
    rewards = None
    if doc.get("reward_sa") is not None or doc.get("reward_obs") is not None:
        rewards = RewardTable(doc.get("reward_sa"), doc.get("reward_obs"))
        rewards.check_against(model)
    return ModelSpec(model, rewards, {"states": s_labels, "actions": a_labels, "observations": o_labels})


def model_to_dict(model: DiscretePOMDP, rewards: RewardTable | None = None, labels: dict | None = None) -> dict:
    labels = labels or {}
    doc = {
        "states": labels.get("states", model.num_states),
        "actions": labels.get("actions", model.num_actions),
        "observations": labels.get("observations", model.num_observations),
        "horizon": model.horizon,
        "transition": model.transition.tolist(),
        "observation": model.observation.tolist(),
        "initial_belief": model.initial_belief.tolist(),
        "action_prior": model.action_prior.tolist(),
    }
    if rewards is not None:
        if rewards.state_action is not None:
            doc["reward_sa"] = rewards.state_action.tolist()
        if rewards.observation is not None:
            doc["reward_obs"] = rewards.observation.tolist()
    return doc


def load_model(path) -> ModelSpec:
    with open(Path(path)) as fh:
        return model_from_dict(json.load(fh))


def save_model(path, model: DiscretePOMDP, rewards: RewardTable | None = None, labels: dict | None = None) -> None:
    with open(Path(path), "w") as fh:
        json.dump(model_to_dict(model, rewards, labels), fh, indent=1)
