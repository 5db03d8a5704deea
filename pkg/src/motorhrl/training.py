"""Pre-training of the motor policy, task-training of the skill selector, and the flat baseline.

Parallel rollout workers are emulated by one vectorized environment stepped in the
learner thread, so a run is a single deterministic process.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basal_ganglia import activity
from .checkpoint import CheckpointError, group_hash, load_checkpoint, params_to_group, save_checkpoint, load_group_into
from .config import RunConfig
from .discriminator import intrinsic_reward
from .envs import Locomotor, TaskEnv, motor_reward
from .hrl import HighLevelAgent, sac_update_high
from .low_level import LowLevelAgent, sac_update_low, sd_update
from .replay import HighReplay, low_level_buffer
from .sac import SacAgent, run_episodes
from .skills import sample_random_skill
from .tensor import no_grad

SCHEMA_VERSION = 1


def fusion_reward(r_f, r_e, h, beta: float):
    """beta * r_f + (1 - beta) * h * r_e, where r_f already includes -log p(z)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return beta * np.asarray(r_f, dtype=np.float64) + (1.0 - beta) * np.asarray(h, np.float64) * np.asarray(r_e, np.float64)


def _streams(seed: int, n: int = 4) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


@contextlib.contextmanager
def _single_thread(enabled: bool):
    if not enabled:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=1):
        yield


# -- run output ---------------------------------------------------------------


class RunWriter:
    """Metrics JSON-lines + CSV mirror, resolved config and manifest for one output dir."""

    def __init__(self, out_dir, cfg: RunConfig, command: str):
        self.out = Path(out_dir) if out_dir is not None else None
        self.cfg = cfg
        self.command = command
        self.records: list[dict] = []
        self.t0 = time.perf_counter()
        self.files: list[str] = []
        if self.out is not None:
            (self.out / "checkpoints").mkdir(parents=True, exist_ok=True)
            cfg.dump(self.out / "config.yaml")
            (self.out / "metrics.jsonl").write_text("")
            self.files += ["config.yaml", "metrics.jsonl", "metrics.csv"]

    def path(self, name: str) -> Path | None:
        return None if self.out is None else self.out / name

    def log(self, record: dict) -> None:
        rec = {k: _plain(v) for k, v in record.items()}
        if not self.cfg.deterministic:
            rec["wall_clock"] = round(time.perf_counter() - self.t0, 3)
        if self.records and rec["sample_count"] < self.records[-1]["sample_count"]:
            raise RuntimeError("metrics must be appended in sample order")
        self.records.append(rec)
        if self.out is not None:
            with open(self.out / "metrics.jsonl", "a") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def close(self, extra: dict | None = None) -> None:
        if self.out is None:
            return
        cols: list[str] = []
        for r in self.records:
            cols += [k for k in r if k not in cols]
        with open(self.out / "metrics.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            w.writerows(self.records)
        manifest = {"schema_version": SCHEMA_VERSION, "command": self.command, "seed": self.cfg.seed,
                    "files": sorted(set(self.files))}
        manifest.update(extra or {})
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


class _Mean:
    def __init__(self):
        self.sums: dict[str, float] = {}
        self.counts: dict[str, int] = {}

    def add(self, d: dict) -> None:
        for k, v in d.items():
            self.sums[k] = self.sums.get(k, 0.0) + float(v)
            self.counts[k] = self.counts.get(k, 0) + 1

    def pop(self, prefix: str = "") -> dict:
        out = {f"{prefix}{k}": self.sums[k] / self.counts[k] for k in self.sums}
        self.sums, self.counts = {}, {}
        return out


class TrajectoryWriter:
    """Per-step CSV rows of evaluation rollouts (``--dump-traj``)."""

    def __init__(self, path, proprio_dim: int, extern_dim: int):
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh)
        self.w.writerow(["lane", "step"] + [f"s{j}" for j in range(proprio_dim)]
                        + [f"e{j}" for j in range(extern_dim)] + ["reward", "done"])
        self.t = None

    def row(self, obs, reward, done, alive, t: int) -> None:
        for lane in np.flatnonzero(alive):
            self.w.writerow([int(lane), t] + [repr(float(x)) for x in obs.proprio[lane]]
                            + [repr(float(x)) for x in obs.extern[lane]]
                            + [repr(float(reward[lane])), int(bool(done[lane]))])

    def close(self) -> None:
        self.fh.close()


def params_hash(groups: dict[str, dict[str, np.ndarray]]) -> str:
    h = hashlib.sha256()
    for g in sorted(groups):
        h.update(g.encode())
        h.update(group_hash(groups[g]).encode())
    return h.hexdigest()


# -- pre-training ---------------------------------------------------------------


@dataclass
class PretrainResult:
    agent: LowLevelAgent
    checkpoint: Path | None
    episodes: dict[str, np.ndarray]
    metrics: list[dict]
    buffer: object
    counters: dict = field(default_factory=dict)


def evaluate_low(agent: LowLevelAgent, cfg: RunConfig, episodes: int, seed: int, traj: TrajectoryWriter | None = None):
    """Deterministic rollouts under uniformly drawn skills: motor return and discriminator accuracy."""
    rng = np.random.default_rng(seed)
    env = Locomotor(n=min(cfg.pretrain.n_envs, episodes), horizon=cfg.pretrain.horizon, body=cfg.body(), seed=seed)
    weights = cfg.weights()
    z = np.zeros(env.n, np.int64)
    hits, seen = [0], [0]

    def act(obs, t):
        if t == 0:
            z[:] = rng.integers(0, agent.encoder.n_skills, env.n)
        with no_grad():
            zc = np.tanh(agent.encoder.encode(z).data)
        return agent.act(obs.proprio, zc, deterministic=True)

    def on_step(obs, alive):
        pred = agent.discriminator.predict(obs.proprio).argmax(axis=1)
        hits[0] += int(((pred == z) & alive).sum())
        seen[0] += int(alive.sum())

    class _Scored:
        """Wraps the basic env so run_episodes sees the motor reward as the score."""

        n = env.n

        def reset(self, s):
            return env.reset(s)

        def step(self, a):
            obs, done = env.step(a)
            r = motor_reward(obs, weights)
            if traj is not None:
                traj.row(obs, r, done, np.ones(env.n, bool), int(env.t[0]))
            return obs, r, done

    motor = run_episodes(_Scored(), act, episodes, seed, on_step)
    return {"eval_motor_return": float(np.mean(motor)), "eval_disc_accuracy": hits[0] / max(seen[0], 1)}


def pretrain(cfg: RunConfig, out_dir=None) -> PretrainResult:
    p, sk = cfg.pretrain, cfg.skill
    init_rng, env_rng, act_rng, upd_rng = _streams(cfg.seed)
    agent = LowLevelAgent.from_config(cfg, init_rng)
    agent.rng = upd_rng
    agent.sac.rng = upd_rng
    writer = RunWriter(out_dir, cfg, "pretrain")
    n = p.n_envs
    env = Locomotor(n=n, horizon=p.horizon, body=cfg.body(), seed=int(env_rng.integers(2**31)))
    weights = cfg.weights()
    act_cfg = cfg.activity()
    C, d = sk.n_skills, sk.latent_dim
    buffer = low_level_buffer(max(1, min(p.buffer_size, p.total_samples)), env.obs_dim, env.act_dim, d)

    ep_z, ep_h, ep_len, ep_ra, ep_rf, ep_re, ep_fell = [], [], [], [], [], [], []
    z = act_rng.integers(0, C, n)
    h = np.asarray(activity(act_cfg, z), dtype=np.float64)
    acc = {k: np.zeros(n) for k in ("ra", "rf", "re")}
    length = np.zeros(n, np.int64)
    obs = env.reset(int(env_rng.integers(2**31)))
    samples = 0
    counters = {"update_cycles": 0, "disc_updates": 0, "sd_updates": 0, "sac_updates": 0}
    losses = _Mean()
    last_logged_ep = 0
    next_eval = p.eval_interval if p.eval_interval > 0 else None

    def log(eval_now: bool):
        nonlocal last_logged_ep
        rec = {"phase": "pretrain", "sample_count": samples, "episode_count": len(ep_z), **counters}
        recent = slice(last_logged_ep, len(ep_z))
        if len(ep_z) > last_logged_ep:
            rec["mean_fusion_return"] = float(np.mean(ep_ra[recent]))
            rec["mean_fusion_reward"] = float(np.sum(ep_ra[recent]) / np.sum(ep_len[recent]))
            rec["mean_r_f"] = float(np.sum(ep_rf[recent]) / np.sum(ep_len[recent]))
            rec["mean_r_e"] = float(np.sum(ep_re[recent]) / np.sum(ep_len[recent]))
        last_logged_ep = len(ep_z)
        rec.update(losses.pop("loss_"))
        rec["alpha"] = agent.sac.temperature.alpha
        if eval_now:
            rec.update(evaluate_low(agent, cfg, p.eval_episodes, cfg.seed + 10_000))
            save_low_checkpoint(agent, cfg, writer.path("checkpoints/low_latest.ckpt"), samples)
        writer.log(rec)

    with _single_thread(cfg.deterministic):
        while samples < p.total_samples:
            noise = act_rng.standard_normal((n, d)).astype(np.float32)
            with no_grad():
                zc = agent.skill_latent(z, noise).data
            if samples < p.warmup_samples:
                action = act_rng.uniform(-1.0, 1.0, (n, env.act_dim))
            else:
                action = agent.act(obs.proprio, zc, act_rng)
            nxt, done = env.step(action)
            r_e = motor_reward(nxt, weights)
            r_f = intrinsic_reward(agent.discriminator, nxt.proprio, z)
            r_a = fusion_reward(r_f, r_e, h, p.beta)
            buffer.push(s=obs.proprio, s_next=nxt.proprio, a=action, z=z, z_c=zc, noise=noise, r_a=r_a,
                        r_f=r_f, r_e=r_e, h=h, done=nxt.fallen)
            acc["ra"] += r_a
            acc["rf"] += r_f
            acc["re"] += r_e
            length += 1
            samples += n
            if done.any():
                for lane in np.flatnonzero(done):
                    ep_z.append(int(z[lane]))
                    ep_h.append(float(h[lane]))
                    ep_len.append(int(length[lane]))
                    ep_ra.append(acc["ra"][lane])
                    ep_rf.append(acc["rf"][lane])
                    ep_re.append(acc["re"][lane])
                    ep_fell.append(bool(nxt.fallen[lane]))
                for v in acc.values():
                    v[done] = 0.0
                length[done] = 0
                z[done] = act_rng.integers(0, C, int(done.sum()))
                h = np.asarray(activity(act_cfg, z), dtype=np.float64)
                nxt = env.reset_where(done, nxt)
            obs = nxt

            if samples >= p.warmup_samples and samples % p.samples_per_update == 0 and len(buffer) >= p.batch_size:
                counters["update_cycles"] += 1
                for _ in range(p.updates):
                    b = buffer.sample_batch(p.batch_size, upd_rng)
                    losses.add({"discriminator": agent.discriminator.update(b["s_next"], b["z"])})
                    counters["disc_updates"] += 1
                for _ in range(p.updates):
                    losses.add({"sd": sd_update(agent)})
                    counters["sd_updates"] += 1
                for _ in range(p.updates):
                    out = sac_update_low(agent, buffer.sample_batch(p.batch_size, upd_rng))
                    losses.add({k: out[k] for k in ("critic", "actor", "temperature")})
                    counters["sac_updates"] += 1
            if next_eval is not None and samples >= next_eval:
                log(eval_now=True)
                next_eval += p.eval_interval
        if not writer.records or writer.records[-1]["sample_count"] != samples:
            log(eval_now=p.total_samples > 0)

    ckpt = writer.path("checkpoints/low.ckpt")
    save_low_checkpoint(agent, cfg, ckpt, samples)
    episodes = {"z": np.asarray(ep_z, np.int64), "h": np.asarray(ep_h), "length": np.asarray(ep_len, np.int64),
                "fusion_return": np.asarray(ep_ra), "r_f": np.asarray(ep_rf), "r_e": np.asarray(ep_re),
                "fallen": np.asarray(ep_fell, bool)}
    extra = {"low_checkpoint": "checkpoints/low.ckpt", "low_params_sha256": params_hash(agent.state_groups()),
             "samples": samples, **counters}
    if writer.out is not None:
        _write_episodes(writer.path("episodes.csv"), episodes)
        writer.files += ["episodes.csv", "checkpoints/low.ckpt"]
        if p.dump_buffer:
            buffer.dump(writer.path("buffer.npz"))
            writer.files.append("buffer.npz")
        if cfg.dump_traj:
            traj = TrajectoryWriter(writer.path("traj.csv"), env.obs_dim, 0)
            evaluate_low(agent, cfg, p.eval_episodes, cfg.seed + 10_000, traj)
            traj.close()
            writer.files.append("traj.csv")
    writer.close(extra)
    return PretrainResult(agent, ckpt, episodes, writer.records, buffer, counters)


def _write_episodes(path, episodes: dict[str, np.ndarray]) -> None:
    cols = list(episodes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", *cols])
        for i in range(len(episodes["z"])):
            w.writerow([i] + [_plain(episodes[c][i]) if episodes[c].dtype != bool else int(episodes[c][i])
                              for c in cols])


def save_low_checkpoint(agent: LowLevelAgent, cfg: RunConfig, path, samples: int = 0) -> None:
    if path is None:
        return
    meta = {"kind": "low", "proprio_dim": agent.proprio_dim, "act_dim": agent.act_dim,
            "n_skills": agent.encoder.n_skills, "skill_dim": agent.encoder.dim, "hidden": list(cfg.net.sizes),
            "samples": samples, "seed": cfg.seed}
    save_checkpoint(path, agent.state_groups(), meta)


def load_low(cfg: RunConfig, path) -> LowLevelAgent:
    """Rebuild the motor policy from ``cfg`` and fill it from a checkpoint (dims must agree)."""
    groups, meta = load_checkpoint(path)
    if meta.get("kind") != "low":
        raise CheckpointError(f"{path}: not a low-level checkpoint")
    agent = LowLevelAgent.from_config(cfg, np.random.default_rng(cfg.seed))
    expect = {"proprio_dim": agent.proprio_dim, "act_dim": agent.act_dim, "n_skills": agent.encoder.n_skills,
              "skill_dim": agent.encoder.dim, "hidden": list(cfg.net.sizes)}
    for k, v in expect.items():
        if meta.get(k) != v:
            raise CheckpointError(f"{path}: {k}={meta.get(k)} does not match config value {v}")
    agent.load_groups(groups)
    return agent


# -- task-training --------------------------------------------------------------


@dataclass
class TaskResult:
    high: object
    low: LowLevelAgent | None
    checkpoint: Path | None
    metrics: list[dict]
    final_score: float
    low_hash_before: str = ""
    low_hash_after: str = ""
    counters: dict = field(default_factory=dict)


def make_high(cfg: RunConfig, splus_dim: int, rng) -> HighLevelAgent:
    t = cfg.tasktrain
    return HighLevelAgent(splus_dim, cfg.skill.latent_dim, cfg.hrl.k, rng, cfg.net.sizes, t.gamma, t.tau, t.lr_pi,
                          t.lr_q, t.lr_alpha, t.alpha_init, t.target_entropy, t.twin, cfg.hrl.value_samples)


def _task_env(cfg: RunConfig, n: int, seed: int) -> TaskEnv:
    return TaskEnv(cfg.task_spec(), n=n, body=cfg.body(), seed=seed)


def evaluate_hierarchy(high: HighLevelAgent, low: LowLevelAgent, cfg: RunConfig, episodes: int, seed: int,
                       traj: TrajectoryWriter | None = None) -> float:
    env = _task_env(cfg, min(cfg.tasktrain.n_envs, episodes), seed)
    k = high.k
    zc = np.zeros((env.n, high.skill_dim))

    def act(obs, t):
        if t % k == 0:
            zc[:] = high.act(obs.s_plus, deterministic=True)
        return low.act(obs.proprio, zc, deterministic=True)

    return float(run_episodes(_traced(env, traj), act, episodes, seed).mean())


def _traced(env, traj):
    if traj is None:
        return env

    class _Env:
        n = env.n

        def reset(self, s):
            return env.reset(s)

        def step(self, a):
            obs, r, done = env.step(a)
            traj.row(obs, r, done, np.ones(env.n, bool), int(env.t[0]))
            return obs, r, done

    return _Env()


def save_high_checkpoint(high: HighLevelAgent, cfg: RunConfig, path, samples: int, splus_dim: int) -> None:
    if path is None:
        return
    groups = {"high_policy": params_to_group(high.policy.named_parameters()),
              "high_critic": params_to_group(high.critic.named_parameters()),
              "temperature": params_to_group(high.temperature.named_parameters())}
    meta = {"kind": "high", "splus_dim": splus_dim, "skill_dim": high.skill_dim, "k": high.k,
            "hidden": list(cfg.net.sizes), "task": cfg.task.kind, "samples": samples, "seed": cfg.seed}
    save_checkpoint(path, groups, meta)


def load_high(cfg: RunConfig, path) -> HighLevelAgent:
    groups, meta = load_checkpoint(path)
    if meta.get("kind") != "high":
        raise CheckpointError(f"{path}: not a high-level checkpoint")
    splus = 3 + cfg.env.n_joints + _task_env(cfg, 1, 0).extern_dim
    high = make_high(cfg, splus, np.random.default_rng(cfg.seed))
    expect = {"splus_dim": splus, "skill_dim": cfg.skill.latent_dim, "k": cfg.hrl.k, "hidden": list(cfg.net.sizes)}
    for k, v in expect.items():
        if meta.get(k) != v:
            raise CheckpointError(f"{path}: {k}={meta.get(k)} does not match config value {v}")
    load_group_into(high.policy.named_parameters(), groups["high_policy"], "high_policy")
    load_group_into(high.critic.named_parameters(), groups["high_critic"], "high_critic")
    load_group_into(high.temperature.named_parameters(), groups["temperature"], "temperature")
    return high


def tasktrain(cfg: RunConfig, low_ckpt, out_dir=None) -> TaskResult:
    """Train the skill selector over a frozen motor policy loaded from ``low_ckpt``."""
    tt, k = cfg.tasktrain, cfg.hrl.k
    low = load_low(cfg, low_ckpt)
    hash_before = params_hash(low.state_groups())
    init_rng, env_rng, act_rng, upd_rng = _streams(cfg.seed + 1)
    low.rng = act_rng
    n = tt.n_envs
    env = _task_env(cfg, n, int(env_rng.integers(2**31)))
    splus_dim = env.obs_dim + env.extern_dim
    d = cfg.skill.latent_dim
    high = make_high(cfg, splus_dim, init_rng)
    high.rng = upd_rng
    replay = HighReplay(max(k, min(tt.buffer_size, max(tt.total_samples, 1))), n, splus_dim, d, k)
    writer = RunWriter(out_dir, cfg, "tasktrain")
    lanes = np.arange(n)
    episode_id = np.arange(n, dtype=np.int64)
    next_episode = n
    step_i = np.zeros(n, np.int64)
    zc = np.zeros((n, d), np.float32)
    score = np.zeros(n)
    ep_scores: list[float] = []
    obs = env.reset(int(env_rng.integers(2**31)))
    samples = 0
    counters = {"update_cycles": 0, "high_updates": 0}
    losses = _Mean()
    last_ep = 0
    next_eval = tt.eval_interval if tt.eval_interval > 0 else None
    final_score = float("nan")
    frozen = [p.requires_grad for p in low.parameters()]
    for prm in low.parameters():
        prm.requires_grad = False

    def log(eval_now: bool):
        nonlocal last_ep, final_score
        rec = {"phase": "tasktrain", "sample_count": samples, "episode_count": len(ep_scores), **counters}
        if len(ep_scores) > last_ep:
            rec["mean_train_score"] = float(np.mean(ep_scores[last_ep:]))
        last_ep = len(ep_scores)
        rec.update(losses.pop("loss_"))
        rec["alpha"] = high.temperature.alpha
        if eval_now:
            final_score = evaluate_hierarchy(high, low, cfg, tt.eval_episodes, cfg.seed + 20_000)
            rec["eval_score"] = final_score
            save_high_checkpoint(high, cfg, writer.path("checkpoints/high_latest.ckpt"), samples, splus_dim)
        writer.log(rec)

    try:
        with _single_thread(cfg.deterministic):
            while samples < tt.total_samples:
                choose = step_i == 0
                if choose.any():
                    if samples < tt.warmup_samples:
                        new = sample_random_skill(d, act_rng, n).squashed
                    else:
                        new = high.act(obs.s_plus, act_rng)
                    zc[choose] = new[choose]
                action = low.act(obs.proprio, zc, act_rng)
                s_plus = obs.s_plus
                t_before = env.t.copy()
                nxt, reward, done = env.step(action)
                replay.push(lanes, s_plus, nxt.s_plus, zc, reward, step_i, nxt.fallen, nxt.truncated, episode_id,
                            t_before)
                score += reward
                samples += n
                step_i = (step_i + 1) % k
                if done.any():
                    ep_scores.extend(score[done].tolist())
                    score[done] = 0.0
                    step_i[done] = 0
                    m = int(done.sum())
                    episode_id[done] = next_episode + np.arange(m)
                    next_episode += m
                    nxt = env.reset_where(done, nxt)
                obs = nxt
                if (samples >= tt.warmup_samples and samples % tt.samples_per_update == 0
                        and len(replay) >= tt.batch_size):
                    counters["update_cycles"] += 1
                    for _ in range(tt.updates):
                        try:
                            batch = replay.sample_windows(tt.batch_size, upd_rng)
                        except ValueError:
                            break
                        out = sac_update_high(high, batch)
                        losses.add({kk: out[kk] for kk in ("critic", "actor", "temperature")})
                        counters["high_updates"] += 1
                if next_eval is not None and samples >= next_eval:
                    log(eval_now=True)
                    next_eval += tt.eval_interval
            if not writer.records or writer.records[-1]["sample_count"] != samples:
                log(eval_now=tt.total_samples > 0)
    finally:
        for prm, f in zip(low.parameters(), frozen):
            prm.requires_grad = f

    hash_after = params_hash(low.state_groups())
    ckpt = writer.path("checkpoints/high.ckpt")
    save_high_checkpoint(high, cfg, ckpt, samples, splus_dim)
    if writer.out is not None:
        writer.files.append("checkpoints/high.ckpt")
        if cfg.dump_traj and tt.total_samples > 0:
            traj = TrajectoryWriter(writer.path("traj.csv"), env.obs_dim, env.extern_dim)
            evaluate_hierarchy(high, low, cfg, tt.eval_episodes, cfg.seed + 20_000, traj)
            traj.close()
            writer.files.append("traj.csv")
    writer.close({"high_checkpoint": "checkpoints/high.ckpt", "low_checkpoint": str(low_ckpt),
                  "low_params_sha256_before": hash_before, "low_params_sha256_after": hash_after,
                  "final_eval_score": None if np.isnan(final_score) else final_score, "samples": samples,
                  **counters})
    return TaskResult(high, low, ckpt, writer.records, final_score, hash_before, hash_after, counters)


def train_flat_sac(cfg: RunConfig, out_dir=None) -> TaskResult:
    """Flat SAC baseline on the task env: acts every step on s+ with the task-training budget."""
    tt = cfg.tasktrain
    init_rng, env_rng, act_rng, upd_rng = _streams(cfg.seed + 2)
    n = tt.n_envs
    env = _task_env(cfg, n, int(env_rng.integers(2**31)))
    splus_dim = env.obs_dim + env.extern_dim
    agent = SacAgent(splus_dim, env.act_dim, init_rng, cfg.net.sizes, tt.gamma, tt.tau, tt.lr_pi, tt.lr_q,
                     tt.lr_alpha, tt.alpha_init, None, tt.twin, name="flat")
    agent.rng = upd_rng
    buffer = low_level_buffer(max(1, min(tt.buffer_size, tt.total_samples)), splus_dim, env.act_dim, 1)
    writer = RunWriter(out_dir, cfg, "baseline")
    obs = env.reset(int(env_rng.integers(2**31)))
    samples = 0
    score = np.zeros(n)
    ep_scores: list[float] = []
    losses = _Mean()
    counters = {"update_cycles": 0, "sac_updates": 0}
    next_eval = tt.eval_interval if tt.eval_interval > 0 else None
    final = {"score": float("nan")}
    zeros = {"z": np.zeros(n, np.int64), "z_c": np.zeros((n, 1), np.float32), "noise": np.zeros((n, 1), np.float32),
             "r_f": np.zeros(n), "r_e": np.zeros(n), "h": np.zeros(n)}

    def evaluate():
        env_e = _task_env(cfg, min(n, tt.eval_episodes), cfg.seed + 20_000)
        return float(run_episodes(env_e, lambda o, t: agent.act(o.s_plus, deterministic=True), tt.eval_episodes,
                                  cfg.seed + 20_000).mean())

    def log(eval_now: bool):
        rec = {"phase": "baseline", "sample_count": samples, "episode_count": len(ep_scores), **counters}
        rec.update(losses.pop("loss_"))
        if eval_now:
            final["score"] = evaluate()
            rec["eval_score"] = final["score"]
        writer.log(rec)

    with _single_thread(cfg.deterministic):
        while samples < tt.total_samples:
            if samples < tt.warmup_samples:
                action = act_rng.uniform(-1.0, 1.0, (n, env.act_dim))
            else:
                action = agent.act(obs.s_plus, act_rng)
            nxt, reward, done = env.step(action)
            buffer.push(s=obs.s_plus, s_next=nxt.s_plus, a=action, r_a=reward, done=nxt.fallen, **zeros)
            score += reward
            samples += n
            if done.any():
                ep_scores.extend(score[done].tolist())
                score[done] = 0.0
                nxt = env.reset_where(done, nxt)
            obs = nxt
            if samples >= tt.warmup_samples and samples % tt.samples_per_update == 0 and len(buffer) >= tt.batch_size:
                counters["update_cycles"] += 1
                for _ in range(tt.updates):
                    b = buffer.sample_batch(tt.batch_size, upd_rng)
                    out = agent.update(b["s"], b["a"], b["r_a"], b["s_next"], b["done"])
                    losses.add({kk: out[kk] for kk in ("critic", "actor", "temperature")})
                    counters["sac_updates"] += 1
            if next_eval is not None and samples >= next_eval:
                log(True)
                next_eval += tt.eval_interval
        if not writer.records or writer.records[-1]["sample_count"] != samples:
            log(tt.total_samples > 0)
    writer.close({"final_eval_score": None if np.isnan(final["score"]) else final["score"], "samples": samples})
    return TaskResult(agent, None, None, writer.records, final["score"], counters=counters)


def evaluate_run(cfg: RunConfig, high_ckpt, low_ckpt, episodes: int | None = None, seed: int | None = None,
                 traj_path=None) -> float:
    """Mean deterministic hierarchical score over ``episodes`` (default: the config's eval count)."""
    low = load_low(cfg, low_ckpt)
    high = load_high(cfg, high_ckpt)
    eps = episodes or cfg.tasktrain.eval_episodes
    s = cfg.seed + 20_000 if seed is None else seed
    if traj_path is None:
        return evaluate_hierarchy(high, low, cfg, eps, s)
    env = _task_env(cfg, 1, 0)
    traj = TrajectoryWriter(traj_path, env.obs_dim, env.extern_dim)
    try:
        return evaluate_hierarchy(high, low, cfg, eps, s, traj)
    finally:
        traj.close()
