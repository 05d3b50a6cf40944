"""Hot numeric kernels.

Each kernel exists twice: a numba loop (``*_nb``) and a vectorised numpy
version (``*_np``). The public name dispatches on :data:`aifcai._accel.USE_NUMBA`;
both variants are importable so tests and benchmarks can compare them.

Shapes: ``A`` actions, ``S`` states, ``O`` observations, ``P`` plans,
``H`` horizon, ``N`` a flat batch of beliefs.
"""

import numpy as np
from scipy import special

from . import _accel
from ._accel import njit


# -- batch rollout -----------------------------------------------------------


def rollout_np(transition, initial, plans):
    """Beliefs ``(P, H+1, S)``; slot 0 is ``initial``, slot t is after action t."""
    P, H = plans.shape
    S = initial.shape[0]
    out = np.empty((P, H + 1, S))
    out[:, 0] = initial
    for t in range(H):
        acts = plans[:, t]
        for a in np.unique(acts):
            rows = acts == a
            out[rows, t + 1] = out[rows, t] @ transition[a]
    return out


@njit
def rollout_nb(transition, initial, plans):
    P, H = plans.shape
    S = initial.shape[0]
    out = np.empty((P, H + 1, S))
    for p in range(P):
        for i in range(S):
            out[p, 0, i] = initial[i]
        for t in range(H):
            a = plans[p, t]
            for j in range(S):
                acc = 0.0
                for i in range(S):
                    acc += out[p, t, i] * transition[a, i, j]
                out[p, t + 1, j] = acc
    return out


# -- expected free energy terms ---------------------------------------------


def efe_terms_np(beliefs, observation, log_pref):
    """Extrinsic cost ``-E_q(o)[ln p~(o)]`` and information gain per belief.

    Information gain is computed as ``H[q(o)] - E_q(s) H[p(o|s)]``. The
    extrinsic cost is ``+inf`` when a predicted observation has zero preference.
    """
    qo = beliefs @ observation
    with np.errstate(invalid="ignore"):
        ext = -np.sum(np.where(qo > 0, qo * log_pref, 0.0), axis=1)
    cond = special.entr(observation).sum(axis=1)
    ig = special.entr(qo).sum(axis=1) - beliefs @ cond
    return ext, ig


@njit
def efe_terms_nb(beliefs, observation, log_pref):
    N, S = beliefs.shape
    O = observation.shape[1]
    cond = np.zeros(S)
    for s in range(S):
        acc = 0.0
        for o in range(O):
            x = observation[s, o]
            if x > 0.0:
                acc -= x * np.log(x)
        cond[s] = acc
    ext = np.empty(N)
    ig = np.empty(N)
    qo = np.empty(O)
    for n in range(N):
        for o in range(O):
            acc = 0.0
            for s in range(S):
                acc += beliefs[n, s] * observation[s, o]
            qo[o] = acc
        e = 0.0
        h = 0.0
        for o in range(O):
            if qo[o] > 0.0:
                e -= qo[o] * log_pref[o]
                h -= qo[o] * np.log(qo[o])
        hc = 0.0
        for s in range(S):
            hc += beliefs[n, s] * cond[s]
        ext[n] = e
        ig[n] = h - hc
    return ext, ig


# -- state-action expectations (CAI and likelihood-AIF stages) -----------------


def sa_expect_np(beliefs, actions, table):
    """``sum_s b[n, s] * table[s, actions[n]]`` for every row ``n``."""
    return np.einsum("ns,ns->n", beliefs, table[:, actions].T)


@njit
def sa_expect_nb(beliefs, actions, table):
    N, S = beliefs.shape
    out = np.empty(N)
    for n in range(N):
        a = actions[n]
        acc = 0.0
        for s in range(S):
            acc += beliefs[n, s] * table[s, a]
        out[n] = acc
    return out


# -- soft backward recursion --------------------------------------------------


def soft_backward_np(transition, stage, log_prior, horizon):
    """Finite-horizon soft Bellman recursion.

    ``Q_t(s,a) = stage[s,a] + sum_s2 p(s2|s,a) V_{t+1}(s2)``,
    ``V_t(s) = ln sum_a p(a|s) exp Q_t(s,a)``, ``V_{H+1} = 0``.
    Returns ``(Q, V, policy)`` with shapes ``(H,S,A)``, ``(H+1,S)``, ``(H,S,A)``.
    """
    A, S, _ = transition.shape
    Q = np.empty((horizon, S, A))
    V = np.zeros((horizon + 1, S))
    pol = np.empty((horizon, S, A))
    for t in range(horizon - 1, -1, -1):
        Q[t] = stage + np.einsum("ast,t->sa", transition, V[t + 1])
        logits = Q[t] + log_prior
        V[t] = special.logsumexp(logits, axis=1)
        pol[t] = np.exp(logits - V[t][:, None])
    return Q, V, pol


@njit
def soft_backward_nb(transition, stage, log_prior, horizon):
    A, S, _ = transition.shape
    Q = np.empty((horizon, S, A))
    V = np.zeros((horizon + 1, S))
    pol = np.empty((horizon, S, A))
    logits = np.empty(A)
    for t in range(horizon - 1, -1, -1):
        for s in range(S):
            m = -np.inf
            for a in range(A):
                acc = 0.0
                for s2 in range(S):
                    acc += transition[a, s, s2] * V[t + 1, s2]
                Q[t, s, a] = stage[s, a] + acc
                logits[a] = Q[t, s, a] + log_prior[s, a]
                if logits[a] > m:
                    m = logits[a]
            z = 0.0
            for a in range(A):
                z += np.exp(logits[a] - m)
            V[t, s] = m + np.log(z)
            for a in range(A):
                pol[t, s, a] = np.exp(logits[a] - V[t, s])
    return Q, V, pol


# -- dispatch -----------------------------------------------------------------

BACKENDS = {
    "numpy": {
        "rollout": rollout_np,
        "efe_terms": efe_terms_np,
        "sa_expect": sa_expect_np,
        "soft_backward": soft_backward_np,
    },
    "numba": {
        "rollout": rollout_nb,
        "efe_terms": efe_terms_nb,
        "sa_expect": sa_expect_nb,
        "soft_backward": soft_backward_nb,
    },
}


def _impl(name):
    return BACKENDS[_accel.backend()][name]


def rollout(transition, initial, plans):
    return _impl("rollout")(
        np.ascontiguousarray(transition, dtype=np.float64),
        np.ascontiguousarray(initial, dtype=np.float64),
        np.ascontiguousarray(plans, dtype=np.int64),
    )


def efe_terms(beliefs, observation, log_pref):
    return _impl("efe_terms")(
        np.ascontiguousarray(beliefs, dtype=np.float64),
        np.ascontiguousarray(observation, dtype=np.float64),
        np.ascontiguousarray(log_pref, dtype=np.float64),
    )


def sa_expect(beliefs, actions, table):
    return _impl("sa_expect")(
        np.ascontiguousarray(beliefs, dtype=np.float64),
        np.ascontiguousarray(actions, dtype=np.int64),
        np.ascontiguousarray(table, dtype=np.float64),
    )


def soft_backward(transition, stage, log_prior, horizon):
    return _impl("soft_backward")(
        np.ascontiguousarray(transition, dtype=np.float64),
        np.ascontiguousarray(stage, dtype=np.float64),
        np.ascontiguousarray(log_prior, dtype=np.float64),
        int(horizon),
    )
