"""Benchmark environments and a closed-loop episode runner.

Agents are handed the true environment model; the only randomness in the
package is the environment sampling done here, through a seeded
``numpy.random.Generator``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import DiscretePOMDP, ModelError, RewardTable, ValueEncoding, build_pomdp, encode
from .objectives import REQUIRED_ENCODING, FunctionalKind
from .planners import SelectMode, plan_posterior, select_action
from .rollout import information_gain, posterior_state


@dataclass(frozen=True, eq=False)
class Environment:
    name: str
    pomdp: DiscretePOMDP
    rewards: RewardTable
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rewards.check_against(self.pomdp)
        dims = {"states": self.pomdp.num_states, "actions": self.pomdp.num_actions,
                "observations": self.pomdp.num_observations}
        for key, names in self.labels.items():
            if key not in dims:
                raise ModelError(f"unknown label group {key!r}")
            if len(names) != dims[key]:
                raise ModelError(f"{len(names)} {key} labels for {dims[key]} {key}")

    def with_horizon(self, horizon: int) -> "Environment":
        return Environment(self.name, self.pomdp.with_(horizon=int(horizon)), self.rewards, self.labels)

    def encoding(self, agent_kind) -> ValueEncoding:
        kind = FunctionalKind(agent_kind)
        return encode(self.pomdp, self.rewards, REQUIRED_ENCODING[kind])

    def reward(self, s: int, a: int, s2: int, o: int) -> float:
        """Reward collected for the step ``s --a--> s2`` that emitted ``o``."""
        if self.rewards.observation is not None:
            return float(self.rewards.observation[o])
        return float(self.rewards.state_action[s, a])

    def label(self, group: str, i: int) -> str:
        names = self.labels.get(group)
        return names[i] if names else str(i)

    def step(self, rng: np.random.Generator, s: int, a: int):
        """Sample ``(next_state, observation)``."""
        m = self.pomdp
        s2 = int(rng.choice(m.num_states, p=m.transition[a, s]))
        o = int(rng.choice(m.num_observations, p=m.observation[s2]))
        return s2, o


# ----------------------------------------------------------------------------
# T-maze

TMAZE_LOCATIONS = ("center", "left", "right", "cue")
TMAZE_CONTEXTS = ("reward-left", "reward-right")
TMAZE_ACTIONS = ("go-left", "go-right", "go-cue", "stay")
TMAZE_OBS = ("null", "cue-left", "cue-right", "win", "nothing")
GO_CUE = 2


def tmaze(horizon: int = 4, win_prob: float = 0.5, win_reward: float = 1.6) -> Environment:
    """T-maze with a hidden reward context.

    States are ``2 * location + context``. The arms are absorbing. At the
    correct arm ``win`` is observed with probability ``win_prob`` (else
    ``nothing``); the wrong arm always shows ``nothing``. Only the cue location
    gives a context-revealing cue; the agent starts in the center, unsure of
    the context.
    """
    if not 0 < win_prob <= 1:
        raise ModelError("win_prob must be in (0, 1]")
    S, A, O = 8, 4, 5
    T = np.zeros((A, S, S))
    for loc in range(4):
        for c in range(2):
            for a in range(A):
                nxt = loc if loc in (1, 2) else (1, 2, 3, loc)[a]
                T[a, 2 * loc + c, 2 * nxt + c] = 1.0
    Om = np.zeros((S, O))
    for c in range(2):
        Om[c, 0] = 1.0
        Om[6 + c, 1 + c] = 1.0
        for loc, good in ((1, 0), (2, 1)):
            s = 2 * loc + c
            if c == good:
                Om[s, 3], Om[s, 4] = win_prob, 1.0 - win_prob
            else:
                Om[s, 4] = 1.0
    b0 = np.array([0.5, 0.5, 0, 0, 0, 0, 0, 0])
    r = np.zeros(O)
    r[3] = win_reward
    labels = {
        "states": [f"{l}/{c}" for l in TMAZE_LOCATIONS for c in TMAZE_CONTEXTS],
        "actions": list(TMAZE_ACTIONS),
        "observations": list(TMAZE_OBS),
    }
    return Environment("tmaze", build_pomdp(T, Om, b0, horizon), RewardTable(observation=r), labels)


# ----------------------------------------------------------------------------
# grid world

GRID_ACTIONS = ("up", "down", "left", "right")
_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def gridworld(width: int, height: int, reward_cell, slip: float = 0.0, horizon: int = 2,
              start_cell: int = 0) -> Environment:
    """Fully observed grid; a move slips to one of the other three moves w.p. ``slip``.

    Cells are indexed ``row * width + col``; moving into a wall stays put.
    ``reward_cell`` is an index or a ``(row, col)`` pair.
    """
    width, height = int(width), int(height)
    if width < 1 or height < 1 or width * height > 36:
        raise ModelError("grid must have between 1 and 36 cells")
    if width * height < 2:
        raise ModelError("grid needs at least 2 cells")
    if not 0.0 <= slip <= 0.5:
        raise ModelError("slip must be in [0, 0.5]")
    S = width * height
    if isinstance(reward_cell, (tuple, list)):
        row, col = reward_cell
        if not (0 <= row < height and 0 <= col < width):
            raise ModelError("reward cell outside the grid")
        reward_cell = row * width + col
    if not 0 <= int(reward_cell) < S:
        raise ModelError("reward cell outside the grid")

    def dest(s, move):
        r, c = divmod(s, width)
        dr, dc = _MOVES[move]
        r2, c2 = r + dr, c + dc
        return r2 * width + c2 if 0 <= r2 < height and 0 <= c2 < width else s

    T = np.zeros((4, S, S))
    for a in range(4):
        for s in range(S):
            for move in range(4):
                T[a, s, dest(s, move)] += (1.0 - slip) if move == a else slip / 3.0
    b0 = np.zeros(S)
    b0[start_cell] = 1.0
    r = np.zeros(S)
    r[int(reward_cell)] = 1.0
    cells = [f"({i // width},{i % width})" for i in range(S)]
    labels = {"states": cells, "actions": list(GRID_ACTIONS), "observations": cells}
    return Environment("gridworld", build_pomdp(T, np.eye(S), b0, horizon), RewardTable(observation=r), labels)


# ----------------------------------------------------------------------------
# bandit

BANDIT_ACTIONS = ("pull-left", "pull-right")
BANDIT_OBS = ("none", "reward", "no-reward")


def bandit(p_left: float, p_right: float, horizon: int = 2, context_prior: float = 0.5) -> Environment:
    """Two-armed bandit whose arm payoffs are swapped in the hidden context 1.

    States are ``2 * position + context`` with positions start, left, right.
    In context 0 the left arm pays with ``p_left`` and the right with
    ``p_right``. ``context_prior`` is the initial probability of context 0.
    """
    for name, p in (("p_left", p_left), ("p_right", p_right), ("context_prior", context_prior)):
        if not 0.0 <= p <= 1.0:
            raise ModelError(f"{name} must be in [0, 1]")
    S, A, O = 6, 2, 3
    T = np.zeros((A, S, S))
    for s in range(S):
        c = s % 2
        T[0, s, 2 + c] = 1.0
        T[1, s, 4 + c] = 1.0
    Om = np.zeros((S, O))
    Om[0, 0] = Om[1, 0] = 1.0
    pay = {(1, 0): p_left, (2, 0): p_right, (1, 1): p_right, (2, 1): p_left}
    for (pos, c), p in pay.items():
        Om[2 * pos + c, 1] = p
        Om[2 * pos + c, 2] = 1.0 - p
    b0 = np.array([context_prior, 1.0 - context_prior, 0, 0, 0, 0])
    labels = {
        "states": [f"{p}/ctx{c}" for p in ("start", "left", "right") for c in (0, 1)],
        "actions": list(BANDIT_ACTIONS),
        "observations": list(BANDIT_OBS),
    }
    r = np.array([0.0, 1.0, 0.0])
    return Environment("bandit", build_pomdp(T, Om, b0, horizon), RewardTable(observation=r), labels)


ENVIRONMENTS = {"tmaze": tmaze, "gridworld": lambda **kw: gridworld(**{"width": 3, "height": 3,
                                                                        "reward_cell": 8, **kw}),
                "bandit": lambda **kw: bandit(**{"p_left": 0.8, "p_right": 0.2, **kw})}


def make_environment(name: str, horizon: int | None = None) -> Environment:
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise ModelError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return factory() if horizon is None else factory(horizon=horizon)


# ----------------------------------------------------------------------------
# episodes


@dataclass(frozen=True)
class EpisodeStep:
    step: int
    observation: int  # observation the action was chosen on
    action: int
    reward: float
    next_observation: int
    plan: tuple  # plan whose breakdown is logged
    breakdown: dict
    info_gain: float
    plan_entropy: float


@dataclass(frozen=True)
class EpisodeLog:
    env: str
    agent_kind: str
    mode: str
    seed: int
    replan: bool
    steps: tuple

    @property
    def total_reward(self) -> float:
        return float(sum(s.reward for s in self.steps))

    @property
    def actions(self) -> tuple:
        return tuple(s.action for s in self.steps)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["steps"] = [asdict(s) for s in self.steps]
        return d


def run_episode(env: Environment, agent_kind, mode=SelectMode.FIRST_ACTION_MARGINAL, seed: int = 0,
                replan: bool = True, cap: int | None = None) -> EpisodeLog:
    """Run one episode of ``env.pomdp.horizon`` steps.

    With ``replan`` the agent recomputes its plan posterior from the current
    belief over the remaining horizon before every action; otherwise it
    commits to the MAP plan from the first step.
    """
    kind = FunctionalKind(agent_kind)
    mode = SelectMode.parse(mode)
    m = env.pomdp
    enc = env.encoding(kind)
    rng = np.random.default_rng(seed)
    H = m.horizon
    s = int(rng.choice(m.num_states, p=m.initial_belief))
    o = int(rng.choice(m.num_observations, p=m.observation[s]))
    belief = posterior_state(m, m.initial_belief, o).probs
    fixed = None
    steps = []
    for t in range(H):
        pp = plan_posterior(m, enc, kind, initial=belief, horizon=H - t, cap=cap)
        if replan:
            a = select_action(pp, mode)
            idx = np.flatnonzero(pp.plans[:, 0] == a)
            i = int(idx[np.argmax(pp.probs[idx])])
        else:
            if fixed is None:
                fixed = pp.map_plan()
            a = fixed[t]
            i = int(np.flatnonzero(np.all(pp.plans == np.array(fixed[t:]), axis=1))[0])
        pred = belief @ m.transition[a]
        s2, o2 = env.step(rng, s, a)
        steps.append(EpisodeStep(
            step=t + 1, observation=o, action=int(a), reward=env.reward(s, a, s2, o2), next_observation=o2,
            plan=tuple(int(x) for x in pp.plans[i]), breakdown=pp.breakdown(i).as_dict(),
            info_gain=information_gain(m, pred), plan_entropy=pp.entropy(),
        ))
        belief = posterior_state(m, pred, o2).probs
        s, o = s2, o2
    return EpisodeLog(env.name, kind.value, mode.value, int(seed), bool(replan), tuple(steps))


EPISODE_COLUMNS = ("step", "observation", "action", "reward", "functional_kind", "total", "info_gain",
                   "plan_entropy")


def write_episode_csv(fh, log: EpisodeLog) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EPISODE_COLUMNS)
    for st in log.steps:
        w.writerow([st.step, st.observation, st.action, repr(st.reward), log.agent_kind,
                    repr(st.breakdown["total"]), repr(st.info_gain), repr(st.plan_entropy)])


def write_episode_json(fh, log: EpisodeLog) -> None:
    json.dump(log.as_dict(), fh, indent=1, sort_keys=True)
    fh.write("\n")


def first_step_entropy(log: EpisodeLog) -> float:
    return log.steps[0].plan_entropy if log.steps else 0.0


__all__ = [
    "Environment", "EpisodeLog", "EpisodeStep", "tmaze", "gridworld", "bandit", "make_environment",
    "run_episode", "write_episode_csv", "write_episode_json",
]
