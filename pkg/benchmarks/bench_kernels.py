"""Time each hot kernel under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

The numba column excludes compilation (one warm-up call per kernel).
"""

import argparse
import time

import numpy as np

from aifcai import kernels
from aifcai._accel import HAS_NUMBA
from aifcai.envs import tmaze
from aifcai.model import encode
from aifcai.planners import enumerate_plans


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rng):
    env = tmaze(horizon=6)
    m = env.pomdp
    plans = enumerate_plans(m.num_actions, m.horizon)
    beliefs = kernels.rollout_np(m.transition, m.initial_belief, plans)
    flat = np.ascontiguousarray(beliefs[:, 1:].reshape(-1, m.num_states))
    pref = np.log(encode(m, env.rewards, "BiasedObservationPrior").biased_obs_prior)
    ll = np.ascontiguousarray(encode(m, env.rewards, "OptimalityLikelihood").optimality_loglik)
    acts = np.ascontiguousarray(plans.reshape(-1))
    pre = np.ascontiguousarray(beliefs[:, :-1].reshape(-1, m.num_states))

    S, A, H = 60, 4, 40
    T = rng.dirichlet(np.ones(S), size=(A, S))
    stage = rng.uniform(-1, 0, size=(S, A))
    log_prior = np.full((S, A), -np.log(A))
    return {
        "rollout (4096 plans, H=6)": ("rollout", (m.transition, m.initial_belief, plans)),
        "efe_terms (24576 beliefs)": ("efe_terms", (flat, m.observation, pref)),
        "sa_expect (24576 beliefs)": ("sa_expect", (pre, acts, ll)),
        "soft_backward (S=60, H=40)": ("soft_backward", (T, stage, log_prior, H)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rows = []
    for label, (name, a) in workloads(rng).items():
        t_np = best_of(kernels.BACKENDS["numpy"][name], a, args.repeat)
        t_nb = best_of(kernels.BACKENDS["numba"][name], a, args.repeat) if HAS_NUMBA else float("nan")
        rows.append((label, t_np * 1e3, t_nb * 1e3, t_np / t_nb))
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, a, b, r in rows:
        print(f"{label:32s} {a:10.3f} {b:10.3f} {r:8.2f}")


if __name__ == "__main__":
    main()
