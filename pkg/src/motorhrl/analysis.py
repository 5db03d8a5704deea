"""Data exports for offline skill analysis (state features, skill vectors, motor reward)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .basal_ganglia import collect_motor_rollouts
from .envs import Locomotor, motor_reward
from .skills import sample_random_skill

EXPORT_COLUMNS = ("source", "rollout", "skill_index", "step")


def random_skill_rollouts(agent, env: Locomotor, weights, n_rollouts: int, rng: np.random.Generator):
    """Like ``collect_motor_rollouts`` but each rollout holds one skill drawn uniformly from (-1, 1)^d."""
    horizon, d = env.horizon, agent.encoder.dim
    skills_all = sample_random_skill(d, rng, n_rollouts).squashed
    r_e = np.zeros((n_rollouts, horizon))
    states = np.zeros((n_rollouts, horizon, env.obs_dim), np.float32)
    for start in range(0, n_rollouts, env.n):
        chunk = skills_all[start : start + env.n]
        m = len(chunk)
        zc = np.resize(chunk, (env.n, d))
        obs = env.reset(int(rng.integers(2**31)))
        for t in range(horizon):
            action = agent.act(obs.proprio, zc, rng, deterministic=True)
            states[start : start + m, t] = obs.proprio[:m]
            obs, _ = env.step(action)
            r_e[start : start + m, t] = motor_reward(obs, weights)[:m]
            obs = env.reset_where(obs.fallen, obs)
    skills = np.repeat(skills_all[:, None, :], horizon, axis=1)
    return r_e, states, skills


def export_skills(agent, env: Locomotor, weights, n_rollouts: int, rng: np.random.Generator, path) -> int:
    """Write encoder-skill and random-skill rollouts as one CSV; returns the number of data rows."""
    zs, r_enc, s_enc, k_enc = collect_motor_rollouts(agent, env, weights, n_rollouts, rng)
    r_rnd, s_rnd, k_rnd = random_skill_rollouts(agent, env, weights, n_rollouts, rng)
    obs_dim, d = s_enc.shape[-1], k_enc.shape[-1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*EXPORT_COLUMNS, *(f"s{j}" for j in range(obs_dim)), *(f"zc{j}" for j in range(d)), "r_e"])
        for source, idx, r_e, states, skills in (("encoder", zs, r_enc, s_enc, k_enc),
                                                 ("random", np.full(n_rollouts, -1), r_rnd, s_rnd, k_rnd)):
            for n in range(r_e.shape[0]):
                for t in range(r_e.shape[1]):
                    w.writerow([source, n, int(idx[n]), t, *map(repr, states[n, t].astype(float)),
                                *map(repr, skills[n, t].astype(float)), repr(float(r_e[n, t]))])
                    rows += 1
    return rows
