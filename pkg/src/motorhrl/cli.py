"""``motorhrl`` command line: pretrain, tasktrain, eval, simulate-bg, export-skills, gradcheck.

Exit status 0 on success, 1 when the configuration or arguments fail validation
(the message names the offending key), 2 on any runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .basal_ganglia import PRESET_ORDER, PRESETS, simulate_presets, write_simulation_csv
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run config (defaults apply to missing keys)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="output directory (or CSV path for the export commands)")
    p.add_argument("--override", nargs="*", default=[], metavar="KEY=VALUE", help="dotted config overrides")
    p.add_argument("--deterministic", action="store_true", help="single thread, no wall-clock in metrics")
    p.add_argument("--dump-traj", action="store_true", help="write per-step evaluation trajectories as CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motorhrl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train the skill-conditioned motor policy")
    _common(p)
    p.add_argument("--dump-buffer", action="store_true", help="save the replay buffer as buffer.npz")

    p = sub.add_parser("tasktrain", help="train the skill selector over a frozen motor policy")
    _common(p)
    p.add_argument("--low-ckpt", required=True)
    p.add_argument("--baseline", action="store_true", help="also train a flat SAC baseline into <out>/baseline")

    p = sub.add_parser("eval", help="score a trained hierarchy on its task")
    _common(p)
    p.add_argument("--low-ckpt", required=True)
    p.add_argument("--high-ckpt", required=True)
    p.add_argument("--episodes", type=int)

    p = sub.add_parser("simulate-bg", help="re-weight motor rewards by activity presets")
    _common(p)
    p.add_argument("--low-ckpt", required=True)
    p.add_argument("--preset", default="all", help=f"one of {', '.join(PRESET_ORDER)} or 'all'")
    p.add_argument("--skills", type=int, default=200)

    p = sub.add_parser("export-skills", help="dump rollouts under encoder and random skills")
    _common(p)
    p.add_argument("--low-ckpt", required=True)
    p.add_argument("--skills", type=int, default=200)

    p = sub.add_parser("gradcheck", help="finite-difference check of every network")
    _common(p)
    p.add_argument("--max-coords", type=int, default=None, help="entries checked per parameter tensor")
    p.add_argument("--epsilon", type=float, default=1e-4)
    return parser


def resolve_config(args) -> RunConfig:
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.deterministic:
        overrides.append("deterministic=true")
    if args.dump_traj:
        overrides.append("dump_traj=true")
    if getattr(args, "dump_buffer", False):
        overrides.append("pretrain.dump_buffer=true")
    if args.out is not None and args.command in ("pretrain", "tasktrain", "eval"):
        overrides.append(f"out_dir={json.dumps(args.out)}")
    return load_config(args.config, overrides)


def _csv_target(out: str | None, default_name: str) -> Path:
    if out is None:
        return Path(default_name)
    p = Path(out)
    return p if p.suffix == ".csv" else p / default_name


def _basic_env(cfg: RunConfig, n: int, seed: int):
    from .envs import Locomotor

    return Locomotor(n=n, horizon=cfg.pretrain.horizon, body=cfg.body(), seed=seed)


def run(args) -> int:
    cfg = resolve_config(args)
    cmd = args.command
    if cmd in ("simulate-bg", "export-skills") and args.skills < 1:
        raise UsageError("--skills must be >= 1")
    if cmd == "simulate-bg" and args.preset != "all" and args.preset not in PRESETS:
        raise UsageError(f"--preset: unknown preset {args.preset!r}")
    if cmd == "eval" and args.episodes is not None and args.episodes < 1:
        raise UsageError("--episodes must be >= 1")

    from . import training

    if cmd == "pretrain":
        res = training.pretrain(cfg, cfg.out_dir)
        print(f"pretrain: {res.counters} -> {res.checkpoint}")
    elif cmd == "tasktrain":
        res = training.tasktrain(cfg, args.low_ckpt, cfg.out_dir)
        print(f"tasktrain: final eval score {res.final_score:.3f} -> {res.checkpoint}")
        if res.low_hash_before != res.low_hash_after:
            raise RuntimeError("low-level parameters changed during task-training")
        if args.baseline:
            base = training.train_flat_sac(cfg, Path(cfg.out_dir) / "baseline")
            print(f"baseline: final eval score {base.final_score:.3f}")
    elif cmd == "eval":
        traj = Path(cfg.out_dir) / "eval_traj.csv" if cfg.dump_traj else None
        if traj is not None:
            traj.parent.mkdir(parents=True, exist_ok=True)
        score = training.evaluate_run(cfg, args.high_ckpt, args.low_ckpt, args.episodes, traj_path=traj)
        print(json.dumps({"task": cfg.task.kind, "episodes": args.episodes or cfg.tasktrain.eval_episodes,
                          "score": score}))
    elif cmd == "simulate-bg":
        low = training.load_low(cfg, args.low_ckpt)
        rng = np.random.default_rng(cfg.seed)
        presets = PRESET_ORDER if args.preset == "all" else (args.preset,)
        env = _basic_env(cfg, cfg.pretrain.n_envs, cfg.seed)
        results = simulate_presets(low, env, cfg.weights(), args.skills, rng, presets)
        path = _csv_target(args.out, "simulate_bg.csv")
        rows = write_simulation_csv(results, path)
        for name, r in results.items():
            print(f"{name:>10}: mean weighted R_e {float(np.mean(r['weighted_r_e'])):+.4f}")
        print(f"wrote {rows} rows to {path}")
    elif cmd == "export-skills":
        from .analysis import export_skills

        low = training.load_low(cfg, args.low_ckpt)
        rng = np.random.default_rng(cfg.seed)
        path = _csv_target(args.out, "skills.csv")
        rows = export_skills(low, _basic_env(cfg, cfg.pretrain.n_envs, cfg.seed), cfg.weights(), args.skills, rng, path)
        print(f"wrote {rows} rows to {path}")
    elif cmd == "gradcheck":
        from .gradcheck import TOLERANCE, gradient_suite

        errors = gradient_suite(cfg.net.sizes, seed=cfg.seed, epsilon=args.epsilon, max_coords=args.max_coords,
                                obs_dim=3 + cfg.env.n_joints, act_dim=cfg.env.n_joints,
                                skill_dim=cfg.skill.latent_dim, n_skills=cfg.skill.n_skills, k=cfg.hrl.k)
        worst = max(errors.values())
        for name, err in errors.items():
            print(f"{name:>14}: max relative error {err:.3e} {'ok' if err < TOLERANCE else 'FAIL'}")
        if worst >= TOLERANCE:
            return EXIT_INVALID
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports bad usage with status 2
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        return run(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CheckpointError, KeyError, OSError, RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
