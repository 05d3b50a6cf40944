"""Exact belief propagation under a plan, Bayes posteriors, information gain.

Index convention: ``b_0`` is the belief in which the first action is taken
and ``b_t = T[a_t]^T b_{t-1}`` is the prior predictive after the t-th action
(before its observation arrives).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DiscretePOMDP, check_plan
from .prob import Categorical, ProbabilityError, as_probs, kl_divergence


class ZeroProbabilityObservation(ProbabilityError):
    pass


@dataclass(frozen=True, eq=False)
class BeliefTrajectory:
    plan: tuple
    initial: np.ndarray
    beliefs: np.ndarray  # (H, S): beliefs[t-1] = b_t

    def __len__(self):
        return len(self.plan)

    def before(self, t: int) -> np.ndarray:
        """Belief in which action ``t`` (1-based) is taken: ``b_{t-1}``."""
        self._check(t)
        return self.initial if t == 1 else self.beliefs[t - 2]

    def after(self, t: int) -> np.ndarray:
        """Belief reached by action ``t`` (1-based): ``b_t``."""
        self._check(t)
        return self.beliefs[t - 1]

    def _check(self, t):
        if not 1 <= t <= len(self.plan):
            raise IndexError(f"timestep {t} outside 1..{len(self.plan)}")


def _belief(model: DiscretePOMDP, belief) -> np.ndarray:
    b = belief.probs if isinstance(belief, Categorical) else as_probs(belief, "belief")
    if b.shape != (model.num_states,):
        raise ValueError(f"belief must have {model.num_states} entries")
    return b


def predict_states(model: DiscretePOMDP, plan, initial=None) -> BeliefTrajectory:
    """Roll ``initial`` (default: the model's initial belief) forward under ``plan``."""
    plan = check_plan(model, plan)
    b = model.initial_belief if initial is None else _belief(model, initial)
    beliefs = np.empty((len(plan), model.num_states))
    cur = b
    for i, a in enumerate(plan):
        cur = cur @ model.transition[a]
        beliefs[i] = cur
    beliefs = as_probs(beliefs, "predicted belief")
    return BeliefTrajectory(plan, b, beliefs)


def predict_observations(model: DiscretePOMDP, belief) -> Categorical:
    return Categorical(_belief(model, belief) @ model.observation)


def posterior_state(model: DiscretePOMDP, belief, o: int) -> Categorical:
    """Bayes rule ``q(s|o) ∝ p(o|s) q(s)``."""
    b = _belief(model, belief)
    if not 0 <= o < model.num_observations:
        raise IndexError(f"observation {o} out of range")
    joint = b * model.observation[:, o]
    z = joint.sum()
    if z <= 0.0:
        raise ZeroProbabilityObservation(f"observation {o} has zero predictive probability")
    return Categorical(joint / z)


def information_gain(model: DiscretePOMDP, belief) -> float:
    """Expected KL from prior to posterior state belief over predicted observations."""
    b = _belief(model, belief)
    qo = b @ model.observation
    total = 0.0
    for o in np.flatnonzero(qo > 0):
        total += qo[o] * kl_divergence(posterior_state(model, b, int(o)), b)
    return float(total)
