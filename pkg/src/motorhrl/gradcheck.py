"""Finite-difference checks of every network architecture and loss used in training."""

from __future__ import annotations

import numpy as np

from .discriminator import Discriminator, ce_loss
from .hrl import step_onehot
from .nn import Mlp, finite_diff_check
from .sac import GaussianPolicy, TwinCritic
from .skills import SkillEncoder, sd_loss
from .tensor import Tensor, concat

TOLERANCE = 1e-3


def gradient_suite(hidden=(64, 64), batch: int = 16, seed: int = 0, epsilon: float = 1e-4,
                   max_coords: int | None = None, obs_dim: int = 6, act_dim: int = 3, skill_dim: int = 7,
                   n_skills: int = 10, k: int = 3) -> dict[str, float]:
    """Max relative error per network: policy, twin critic, discriminator, encoder, step critic, tanh mlp."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, obs_dim + skill_dim))
    eps = rng.standard_normal((batch, act_dim))
    a = np.tanh(rng.standard_normal((batch, act_dim)))
    y = rng.standard_normal(batch)
    z = rng.integers(0, n_skills, batch)
    out = {}

    policy = GaussianPolicy(obs_dim + skill_dim, act_dim, rng, hidden)

    def policy_loss():
        act, logp = policy.rsample(Tensor(x), eps)
        return (logp * 0.1 - act.sum(axis=-1)).mean()

    out["policy"] = finite_diff_check(policy, policy_loss, epsilon, max_coords, rng)

    critic = TwinCritic(obs_dim + skill_dim + act_dim, rng, hidden)
    xa = np.concatenate([x, a], axis=1)

    def critic_loss():
        qs = critic(Tensor(xa))
        sq = sum((((q - Tensor(y)) ** 2).mean() for q in qs), Tensor(0.0))
        return sq + critic.min_q(Tensor(xa)).mean()

    out["twin_critic"] = finite_diff_check(critic, critic_loss, epsilon, max_coords, rng)

    disc = Discriminator(obs_dim, n_skills, rng, hidden)
    s = rng.standard_normal((batch, obs_dim))
    out["discriminator"] = finite_diff_check(disc, lambda: ce_loss(disc, s, z), epsilon, max_coords, rng)

    enc = SkillEncoder(n_skills, skill_dim, rng=rng)
    noise = rng.standard_normal((batch, skill_dim))

    def encoder_loss():
        zc = (enc.encode(z) + Tensor(noise * 0.3)).tanh()
        return sd_loss(enc) + (zc * zc).sum() * 0.1

    out["encoder"] = finite_diff_check(enc, encoder_loss, epsilon, max_coords, rng)

    step_critic = TwinCritic(obs_dim + skill_dim + k, rng, hidden)
    i = rng.integers(0, k, batch)

    def step_loss():
        inp = concat([Tensor(x), Tensor(step_onehot(i, k))], axis=1)
        return sum((((q - Tensor(y)) ** 2).mean() * 0.5 for q in step_critic(inp)), Tensor(0.0))

    out["step_critic"] = finite_diff_check(step_critic, step_loss, epsilon, max_coords, rng)

    tanh_net = Mlp([obs_dim, *hidden, 2], rng, activation="tanh")
    out["tanh_mlp"] = finite_diff_check(tanh_net, lambda: (tanh_net(Tensor(s)) ** 2).mean(), epsilon, max_coords, rng)
    return out
