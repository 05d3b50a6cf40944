"""Command line: ``compare``, ``verify`` and ``inspect``.

Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 plan enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import oracle
from .envs import ENVIRONMENTS, Environment, make_environment, run_episode, write_episode_csv, write_episode_json
from .model import ModelError, encode, load_model
from .objectives import REQUIRED_ENCODING, FunctionalKind, cai_plan_stage, efe_stage, write_breakdown_csv
from .planners import EnumerationCapError, SelectMode, enumeration_cap, plan_posterior
from .prob import ProbabilityError
from .rollout import predict_states

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str = "tmaze"  # a registered name or a model-file path
    agent_kinds: tuple = ("EfePlanStage", "CaiPlanStage")
    horizon: int | None = None
    seeds: tuple = tuple(range(10))
    select_mode: str = "FirstActionMarginal-Argmax"
    replan: bool = True
    output_dir: str = "results"

    def validate(self) -> "ExperimentConfig":
        if not self.agent_kinds:
            raise ConfigError("at least one agent kind is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        try:
            kinds = tuple(FunctionalKind(k).value for k in self.agent_kinds)
            mode = SelectMode.parse(self.select_mode).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for k in kinds:
            if k not in ("CaiPlanStage", "EfePlanStage", "LikelihoodAifPlanStage"):
                raise ConfigError(f"{k} is not a plan-based agent")
        if self.horizon is not None and (not isinstance(self.horizon, int) or self.horizon < 1):
            raise ConfigError("horizon must be a positive integer")
        if any(not isinstance(s, int) or isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds must be integers")
        return replace(self, agent_kinds=kinds, select_mode=mode, seeds=tuple(self.seeds))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        doc = dict(doc)
        for key in ("agent_kinds", "seeds"):
            if key in doc:
                if not isinstance(doc[key], list):
                    raise ConfigError(f"{key} must be a list")
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def load_environment(self) -> Environment:
        if self.environment in ENVIRONMENTS:
            return make_environment(self.environment, self.horizon)
        path = Path(self.environment)
        if not path.exists():
            raise ConfigError(f"{self.environment!r} is neither a known environment nor a model file")
        spec = load_model(path)
        if spec.rewards is None:
            raise ConfigError("model file has no rewards")
        env = Environment(path.stem, spec.model, spec.rewards, spec.labels)
        return env if self.horizon is None else env.with_horizon(self.horizon)


def _parse_seeds(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None


def _parse_plan(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"bad plan {text!r}") from None


def build_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    cfg = ExperimentConfig.from_dict(doc)
    overrides = {}
    if args.env is not None:
        overrides["environment"] = args.env
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.seeds is not None:
        overrides["seeds"] = _parse_seeds(args.seeds)
    if args.kinds is not None:
        overrides["agent_kinds"] = tuple(k for k in args.kinds.split(",") if k)
    if args.mode is not None:
        overrides["select_mode"] = args.mode
    if args.no_replan:
        overrides["replan"] = False
    if args.out is not None:
        overrides["output_dir"] = args.out
    return replace(cfg, **overrides).validate()


def _table(header, rows) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


# ----------------------------------------------------------------------------
# compare


def cmd_compare(cfg: ExperimentConfig, stream=None) -> int:
    stream = stream or sys.stdout
    env = cfg.load_environment()
    m = env.pomdp
    if m.num_actions ** m.horizon > enumeration_cap():
        raise EnumerationCapError(f"{m.num_actions}^{m.horizon} plans exceed the cap {enumeration_cap()}")
    out = Path(cfg.output_dir)
    (out / "episodes").mkdir(parents=True, exist_ok=True)
    summary = []
    for kind in cfg.agent_kinds:
        enc = env.encoding(kind)
        pp = plan_posterior(m, enc, kind)
        with open(out / f"breakdown_{kind}.csv", "w", newline="") as fh:
            write_breakdown_csv(fh, ((tuple(p), t, pp.breakdown(i, t))
                                     for i, p in enumerate(pp.plans) for t in range(1, m.horizon + 1)))
        logs = []
        for seed in cfg.seeds:
            log = run_episode(env, kind, cfg.select_mode, seed, cfg.replan)
            stem = out / "episodes" / f"{kind}_seed{seed}"
            with open(stem.with_suffix(".csv"), "w", newline="") as fh:
                write_episode_csv(fh, log)
            with open(stem.with_suffix(".json"), "w") as fh:
                write_episode_json(fh, log)
            logs.append(log)
        firsts = Counter(log.actions[0] for log in logs)
        modal = min(firsts, key=lambda a: (-firsts[a], a))
        summary.append({
            "agent_kind": kind,
            "episodes": len(logs),
            "mean_reward": float(np.mean([log.total_reward for log in logs])),
            "mean_info_gain": float(np.mean([np.mean([s.info_gain for s in log.steps]) for log in logs])),
            "plan_entropy": pp.entropy(),
            "modal_first_action": env.label("actions", modal),
            "map_plan": " ".join(env.label("actions", a) for a in pp.map_plan()),
        })
    cols = list(summary[0])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in summary:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    print(f"environment {env.name}, horizon {m.horizon}, {len(cfg.seeds)} seeds, mode {cfg.select_mode}",
          file=stream)
    print(_table(cols, [[_fmt(v) if isinstance(v, float) else v for v in r.values()] for r in summary]),
          file=stream)
    return EXIT_OK


# ----------------------------------------------------------------------------
# verify


def cmd_verify(seed: int, instances: int, report=None, corrupt: bool = False, stream=None) -> int:
    stream = stream or sys.stdout
    if instances < 0:
        raise ConfigError("instances must be >= 0")
    results = oracle.verification_battery(seed, instances, corrupt=1e-6 if corrupt else 0.0)
    if report:
        with open(report, "w", newline="") as fh:
            oracle.write_report_csv(fh, results)
    if not results:
        print("empty report: 0 instances checked", file=stream)
        return EXIT_OK
    rows = []
    for name, (dev, thr, ok, n) in oracle.summarize(results).items():
        rows.append([name, n, f"{dev:.3e}", f"{thr:.0e}", "PASS" if ok else "FAIL"])
    print(_table(["check", "instances", "max_abs_deviation", "threshold", "result"], rows), file=stream)
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "verification FAILED", file=stream)
    return EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------------------
# inspect


def cmd_inspect(model_path, plan, stream=None, csv_path=None) -> int:
    stream = stream or sys.stdout
    spec = load_model(model_path)
    m = spec.model
    if spec.rewards is None:
        raise ConfigError("model file has no rewards")
    if len(plan) != m.horizon:
        raise ConfigError(f"plan has {len(plan)} actions, horizon is {m.horizon}")
    if any(not 0 <= a < m.num_actions for a in plan):
        raise ConfigError(f"plan actions must be in 0..{m.num_actions - 1}")
    traj = predict_states(m, plan)
    cai = encode(m, spec.rewards, REQUIRED_ENCODING[FunctionalKind.CAI_PLAN_STAGE])
    aif = None
    if spec.rewards.observation is not None:
        aif = encode(m, spec.rewards, REQUIRED_ENCODING[FunctionalKind.EFE_PLAN_STAGE])
    rows, records = [], []
    for t in range(1, m.horizon + 1):
        c = cai_plan_stage(m, cai, plan, t, traj)
        records.append((plan, t, c))
        row = [t, spec.labels.get("actions", [str(a) for a in range(m.num_actions)])[plan[t - 1]],
               _fmt(c.extrinsic_value), _fmt(c.observation_ambiguity), _fmt(c.total)]
        if aif is not None:
            e = efe_stage(m, aif, plan, t, traj)
            records.append((plan, t, e))
            row += [_fmt(e.extrinsic_value), _fmt(e.intrinsic_value), _fmt(e.total)]
        else:
            row += ["n/a"] * 3
        rows.append(row)
    header = ["t", "action", "cai_extrinsic", "cai_ambiguity", "cai_total", "aif_extrinsic", "aif_intrinsic",
              "aif_total"]
    print(_table(header, rows), file=stream)
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            write_breakdown_csv(fh, records)
    return EXIT_OK


# ----------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aifcai", description="Compare control-as-inference and active-inference planners.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compare", help="run agents in an environment and summarise")
    c.add_argument("--config", help="JSON experiment config; flags override its fields")
    c.add_argument("--env", help=f"environment name ({', '.join(ENVIRONMENTS)}) or model file")
    c.add_argument("--horizon", type=int)
    c.add_argument("--seeds", help="comma-separated seeds")
    c.add_argument("--kinds", help="comma-separated agent kinds, e.g. EfePlanStage,CaiPlanStage")
    c.add_argument("--mode", help="action selection: marginal or map")
    c.add_argument("--no-replan", action="store_true", help="follow the initial MAP plan")
    c.add_argument("--out", help="output directory")

    v = sub.add_parser("verify", help="run the identity and equivalence battery")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--instances", type=int, default=100)
    v.add_argument("--report", help="write per-instance results as CSV")
    v.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)

    i = sub.add_parser("inspect", help="per-step breakdowns of one plan")
    i.add_argument("--model", required=True, help="model JSON file")
    i.add_argument("--plan", required=True, help="comma-separated action indices")
    i.add_argument("--csv", help="also write the breakdown rows as CSV")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "compare":
            return cmd_compare(build_config(args))
        if args.command == "verify":
            return cmd_verify(args.seed, args.instances, args.report, args.corrupt)
        return cmd_inspect(args.model, _parse_plan(args.plan), csv_path=args.csv)
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ModelError, ProbabilityError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
