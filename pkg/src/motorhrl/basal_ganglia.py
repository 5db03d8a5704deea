"""Skill-activity gating of the motor reward, with disease presets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# activity influence factor per preset
PRESETS = {
    "severe_hd": 10.0,
    "mild_hd": 3.0,
    "normal": 1.0,
    "mild_pd": 0.2,
    "severe_pd": 0.0,
}
PRESET_ORDER = ("severe_hd", "mild_hd", "normal", "mild_pd", "severe_pd")
CSV_COLUMNS = ("preset", "skill_index", "step", "r_e", "h", "weighted_r_e", "z")


@dataclass(frozen=True)
class ActivityConfig:
    b_glu: float = 1.0
    n_skills: int = 10
    preset: str = "custom"

    def __post_init__(self):
        if self.b_glu < 0:
            raise ValueError("b_glu must be non-negative")
        if self.preset != "custom" and self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")

    @classmethod
    def from_preset(cls, name: str, n_skills: int = 10) -> "ActivityConfig":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_ORDER)}")
        return cls(b_glu=PRESETS[name], n_skills=n_skills, preset=name)


def activity(cfg: ActivityConfig, z) -> np.ndarray | float:
    """h(z) = min(b_glu * z / (C - 1), 1); the severe-HD preset is the constant 1."""
    zs = np.asarray(z, dtype=np.float64)
    if np.any(zs < 0) or np.any(zs > cfg.n_skills - 1):
        raise IndexError("skill index out of range")
    if cfg.preset == "severe_hd":
        h = np.ones_like(zs)
    elif cfg.n_skills == 1:
        h = np.zeros_like(zs) if cfg.b_glu == 0 else np.ones_like(zs)
    else:
        h = np.minimum(cfg.b_glu * zs / (cfg.n_skills - 1), 1.0)
    return float(h) if np.ndim(z) == 0 else h


def activity_table(n_skills: int = 10) -> dict[str, np.ndarray]:
    zs = np.arange(n_skills)
    return {p: activity(ActivityConfig.from_preset(p, n_skills), zs) for p in PRESET_ORDER}


def collect_motor_rollouts(agent, env, weights, n_rollouts: int, rng: np.random.Generator):
    """Roll the low-level policy for ``env.horizon`` steps under ``n_rollouts`` sampled skills.

    Each rollout draws a discrete skill uniformly, then a continuous skill around its
    embedding every step (as during pre-training). A body that falls is reset and the
    rollout continues, so every rollout contributes exactly ``horizon`` rows.
    Returns arrays ``z`` (n,), ``r_e`` (n, T), ``states`` (n, T, obs_dim), ``skills`` (n, T, d).
    """
    from .envs import motor_reward
    from .tensor import no_grad

    horizon = env.horizon
    zs = rng.integers(0, agent.encoder.n_skills, n_rollouts)
    r_e = np.zeros((n_rollouts, horizon))
    states = np.zeros((n_rollouts, horizon, env.obs_dim), dtype=np.float32)
    skills = np.zeros((n_rollouts, horizon, agent.encoder.dim), dtype=np.float32)
    batch = env.n
    for start in range(0, n_rollouts, batch):
        chunk = zs[start : start + batch]
        m = len(chunk)
        z_full = np.resize(chunk, batch)
        obs = env.reset(int(rng.integers(2**31)))
        for t in range(horizon):
            with no_grad():
                zc = agent.encoder.sample(z_full, rng).squashed
                action = agent.act(obs.proprio, zc, rng, deterministic=True)
            states[start : start + m, t] = obs.proprio[:m]
            skills[start : start + m, t] = zc[:m]
            obs, done = env.step(action)
            r_e[start : start + m, t] = motor_reward(obs, weights)[:m]
            obs = env.reset_where(obs.fallen, obs)
    return zs, r_e, states, skills


def simulate_presets(agent, env, weights, n_skills_sampled: int, rng: np.random.Generator,
                     presets=PRESET_ORDER) -> dict[str, dict[str, np.ndarray]]:
    """Analysis-only mode: one shared motor-reward stream re-weighted by each preset's h(z)."""
    zs, r_e, _, _ = collect_motor_rollouts(agent, env, weights, n_skills_sampled, rng)
    out = {}
    for name in presets:
        h = activity(ActivityConfig.from_preset(name, agent.encoder.n_skills), zs)
        out[name] = {"z": zs, "r_e": r_e, "h": h, "weighted_r_e": h[:, None] * r_e}
    return out


def write_simulation_csv(results: dict[str, dict[str, np.ndarray]], path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for preset, res in results.items():
            n, horizon = res["r_e"].shape
            for k in range(n):
                for t in range(horizon):
                    w.writerow([preset, k, t, repr(float(res["r_e"][k, t])), repr(float(res["h"][k])),
                                repr(float(res["weighted_r_e"][k, t])), int(res["z"][k])])
                    rows += 1
    return rows
