"""Command-line surface: critique, perturb, refine, verify, simulate, and
dataset subcommands.

Every command validates its configuration before running, embeds the effective
configuration and seed in its report, and exits nonzero with a machine-parsable
`error: category=<name>:` line on any failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import perturb as perturb_mod
from . import sceneio
from .control import (
    DEFAULT_LOOKAHEAD,
    BrakeConfig,
    LateralController,
    LongitudinalController,
    PidGains,
)
from .errors import SchemaError, TrajCriticError
from .refine import (
    CriticConfig,
    estimate_beta,
    estimate_lipschitz,
    histogram_report,
    iterate_refinement,
    theorem1_audit,
    theorem2_audit,
    _same_scene_pairs,
)
from .risk import RiskThresholds, aggregate
from .scenarios import desk_suite
from .sim import run_suite
from .critique import build


@dataclasses.dataclass(frozen=True)
class CliConfig:
    thresholds: RiskThresholds = RiskThresholds()
    critic: CriticConfig = CriticConfig()
    lateral_gains: PidGains = PidGains(kp=0.9, ki=0.0, kd=0.2)
    longitudinal_gains: PidGains = PidGains(kp=0.5, ki=0.05, kd=0.0, integral_clamp=2.0)
    lookahead: float = DEFAULT_LOOKAHEAD
    brake: BrakeConfig = BrakeConfig()
    seed: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = ("thresholds", "critic", "control", "seed")


def load_config(path: str | None, seed: int | None = None) -> CliConfig:
    """Build the effective configuration from an optional JSON file plus
    command-line overrides. Unknown keys are rejected."""
    raw = {}
    if path is not None:
        raw = sceneio.load_json(path)
        unknown = set(raw) - set(_SECTIONS)
        if unknown:
            raise SchemaError(f"{path}: unknown config sections {sorted(unknown)}")

    def section(name, cls, **extra):
        d = dict(raw.get(name, {}))
        d.update(extra)
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise SchemaError(f"config.{name}: unknown keys {sorted(unknown)}")
        return cls(**d)

    thresholds = section("thresholds", RiskThresholds)
    critic_raw = dict(raw.get("critic", {}))
    critic_raw.pop("thresholds", None)
    allowed = {f.name for f in dataclasses.fields(CriticConfig)} - {"thresholds"}
    unknown = set(critic_raw) - allowed
    if unknown:
        raise SchemaError(f"config.critic: unknown keys {sorted(unknown)}")
    critic = CriticConfig(thresholds=thresholds, **critic_raw)

    control = raw.get("control", {})
    unknown = set(control) - {"lateral", "longitudinal", "lookahead", "brake"}
    if unknown:
        raise SchemaError(f"config.control: unknown keys {sorted(unknown)}")

    def gains(name, default):
        d = control.get(name)
        if d is None:
            return default
        allowed = {f.name for f in dataclasses.fields(PidGains)}
        unknown = set(d) - allowed
        if unknown:
            raise SchemaError(f"config.control.{name}: unknown keys {sorted(unknown)}")
        return PidGains(**d)

    brake_raw = control.get("brake")
    brake = BrakeConfig(**brake_raw) if brake_raw else BrakeConfig()
    return CliConfig(
        thresholds=thresholds,
        critic=critic,
        lateral_gains=gains("lateral", CliConfig.lateral_gains),
        longitudinal_gains=gains("longitudinal", CliConfig.longitudinal_gains),
        lookahead=float(control.get("lookahead", DEFAULT_LOOKAHEAD)),
        brake=brake,
        seed=int(seed if seed is not None else raw.get("seed", 0)),
    )


def _report(cfg: CliConfig, payload: dict) -> dict:
    return {"schema_version": sceneio.SCHEMA_VERSION,
            "config": cfg.as_dict(), "seed": cfg.seed, **payload}


def _write_report(report: dict, out: str | None):
    if out:
        sceneio.save_json(report, out)


def _load_scene_map(paths):
    scenes = {}
    for p in paths:
        ctx = sceneio.load_scene(p)
        scenes[ctx.scene_id] = ctx
    return scenes


def _corpus_with_ctx(corpus_path: str, scene_paths):
    records = sceneio.load_corpus(corpus_path)
    scenes = _load_scene_map(scene_paths)
    pairs = []
    for rec in records:
        if rec.scene_id not in scenes:
            raise SchemaError(
                f"{corpus_path}: record {rec.record_id} references unknown scene "
                f"{rec.scene_id!r}; pass it via --scenes")
        pairs.append((rec.rough, scenes[rec.scene_id]))
    return pairs


# ---------------------------------------------------------------------------
# Subcommand bodies

def cmd_critique(args, cfg: CliConfig) -> int:
    ctx = sceneio.load_scene(args.scene)
    traj = sceneio.load_trajectory(args.trajectory)
    report = aggregate(traj, ctx, cfg.thresholds)
    critique, text = build(report, traj, ctx.expert)
    print(text, end="")
    _write_report(_report(cfg, {
        "scene_id": ctx.scene_id,
        "flags": critique.flags,
        "n_risks": report.n_risks(),
        "critique_text": text,
        "speed_suggestion": dataclasses.asdict(critique.speed_suggestion),
        "direction_suggestion": dataclasses.asdict(critique.direction_suggestion),
        "detail": critique.detail,
    }), args.out)
    return 0


def cmd_perturb(args, cfg: CliConfig) -> int:
    scenes = [sceneio.load_scene(p) for p in args.scene]
    if args.kind:
        mix = {k: (1.0 if k == args.kind else 0.0) for k in perturb_mod.KINDS}
    else:
        mix = None
    records, manifest = perturb_mod.synthesize_batch(
        scenes, args.count, cfg.seed, mix=mix, thresholds=cfg.thresholds)
    sceneio.save_corpus(records, args.out)
    _write_report(_report(cfg, {"manifest": manifest, "corpus": str(args.out)}),
                  args.manifest or str(args.out) + ".manifest.json")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_refine(args, cfg: CliConfig) -> int:
    ctx = sceneio.load_scene(args.scene)
    traj = sceneio.load_trajectory(args.trajectory)
    critic = dataclasses.replace(cfg.critic, max_iterations=args.steps)
    trace = iterate_refinement(traj, ctx, [ctx.expert], critic,
                               beta=args.beta, l_q=args.l_q, l_c=args.l_c)
    payload = {
        "scene_id": ctx.scene_id,
        "steps_requested": args.steps,
        "steps_realized": len(trace.actions) - 1,
        "q_values": list(trace.q_values),
        "rho_values": list(trace.rho_values),
        "bounds": list(trace.bounds),
        "condition_holds": list(trace.condition_holds),
        "monotone": list(trace.monotone),
        "refined": sceneio.trajectory_to_dict(trace.actions[-1]),
    }
    print(f"q: {trace.q_values[0]:.4f} -> {trace.q_values[-1]:.4f} "
          f"in {len(trace.actions) - 1} step(s)")
    _write_report(_report(cfg, payload), args.out)
    return 0


def cmd_verify(args, cfg: CliConfig) -> int:
    pairs = _corpus_with_ctx(args.corpus, args.scenes)
    if args.what == "assumptions":
        beta = estimate_beta(pairs, cfg.critic)
        lip = estimate_lipschitz(_same_scene_pairs(pairs), cfg.critic)
        payload = {
            "samples": len(pairs),
            "beta": beta.summary(),
            "lipschitz": lip.summary(),
            "l_q_histogram": histogram_report(lip.l_q_samples),
            "l_c_histogram": histogram_report(lip.l_c_samples),
        }
        print(f"beta_hat: {beta.beta_hat:.4f}  "
              f"L_Q max: {max(lip.l_q_samples):.4f}  "
              f"L_C max: {max(lip.l_c_samples):.4f}")
    elif args.what == "theorem1":
        payload = theorem1_audit(pairs, cfg.critic)
        print(f"violations: {payload['violations']}")
    else:
        payload = theorem2_audit(pairs, cfg.critic)
        print(f"counterexamples: {payload['counterexamples']}")
    _write_report(_report(cfg, {"audit": args.what, **payload}), args.out)
    return 0


def cmd_simulate(args, cfg: CliConfig) -> int:
    if args.target == "suite":
        scenarios = desk_suite()
    else:
        scenarios = [sceneio.load_scenario(args.target)]
    variants = {"raw": 0}
    if args.refined:
        variants["refined"] = cfg.critic.max_iterations
    report = run_suite(scenarios, variants, seeds=[cfg.seed], sigma=args.sigma,
                       critic_cfg=cfg.critic)
    for name, v in report["variants"].items():
        print(f"{name}: success_rate={v['success_rate']:.4f} "
              f"collision_rate={v['collision_rate']:.4f} "
              f"completion={v['mean_route_completion']:.4f}")
    _write_report(_report(cfg, report), args.out)
    return 0


def cmd_dataset_mix(args, cfg: CliConfig) -> int:
    mgs = sceneio.load_corpus(args.mgs) if args.mgs else []
    epas = sceneio.load_corpus(args.epas) if args.epas else []
    gt = sceneio.load_corpus(args.gt) if args.gt else []
    records, manifest = sceneio.mix_dataset(mgs, epas, gt, args.mode,
                                            args.epoch, cfg.seed)
    sceneio.save_corpus(records, args.out)
    _write_report(_report(cfg, {"manifest": manifest}),
                  args.manifest or str(args.out) + ".manifest.json")
    print(f"mixed {len(records)} records "
          f"({json.dumps(manifest['counts'], sort_keys=True)})")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    parser = argparse.ArgumentParser(
        prog="trajcritic",
        parents=[common],
        description="Rule-based trajectory critique, perturbation synthesis, "
                    "critic-guided refinement, and a desk-scale closed-loop simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add_parser("critique", help="analyze a trajectory against a scene")
    p.add_argument("scene")
    p.add_argument("trajectory")
    p.add_argument("--out", help="structured report path")
    p.set_defaults(func=cmd_critique)

    p = add_parser("perturb", help="synthesize a perturbation corpus")
    p.add_argument("scene", nargs="+")
    p.add_argument("--kind", choices=perturb_mod.KINDS)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="corpus JSONL path")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_perturb)

    p = add_parser("refine", help="iterate the critic on a trajectory")
    p.add_argument("scene")
    p.add_argument("trajectory")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--l-q", dest="l_q", type=float, default=1.0)
    p.add_argument("--l-c", dest="l_c", type=float, default=1.0)
    p.add_argument("--out", help="trace report path")
    p.set_defaults(func=cmd_refine)

    p = add_parser("verify", help="empirical assumption and bound audits")
    p.add_argument("what", choices=("assumptions", "theorem1", "theorem2"))
    p.add_argument("corpus", help="corpus JSONL path")
    p.add_argument("--scenes", nargs="+", required=True,
                   help="scene JSON files referenced by the corpus")
    p.add_argument("--out", help="audit report path")
    p.set_defaults(func=cmd_verify)

    p = add_parser("simulate", help="run a scenario or the shipped suite")
    p.add_argument("target", help="'suite' or a scenario JSON path")
    p.add_argument("--refined", action="store_true",
                   help="also run the critic-refined variant")
    p.add_argument("--sigma", type=float, default=0.0,
                   help="planner waypoint noise std")
    p.add_argument("--out", help="summary report path")
    p.set_defaults(func=cmd_simulate)

    p = add_parser("dataset", help="dataset operations")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    d = dsub.add_parser("mix", parents=[common],
                        help="sample a training epoch at fixed ratios")
    d.add_argument("--mode", choices=("base", "full"), required=True)
    d.add_argument("--epoch", type=int, required=True)
    d.add_argument("--mgs", help="planner-rollout corpus JSONL")
    d.add_argument("--epas", help="perturbation corpus JSONL")
    d.add_argument("--gt", help="expert corpus JSONL")
    d.add_argument("--out", required=True)
    d.add_argument("--manifest")
    d.set_defaults(func=cmd_dataset_mix)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        return args.func(args, cfg)
    except TrajCriticError as e:
        print(f"error: category={e.category}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: category=io: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
