"""The skill-conditioned motor policy: encoder + SAC learner + discriminator bundle."""

from __future__ import annotations

import numpy as np

from .checkpoint import load_group_into, params_to_group
from .discriminator import Discriminator, identity_features
from .nn import Adam
from .sac import SacAgent, polyak_update
from .skills import SkillEncoder, sd_loss
from .tensor import Tensor, concat, no_grad

LOW_GROUPS = ("z_encoder", "discriminator", "low_policy", "low_critic", "temperature")


def joint_features(states: np.ndarray) -> np.ndarray:
    """Posture-only view of the proprio vector (drops velocity, yaw rate and tilt)."""
    return np.asarray(states)[..., 3:]


FEATURE_MAPS = {"identity": identity_features, "joints": joint_features}


class LowLevelAgent:
    """pi(a | s, z^c) with twin critics Q(s, z^c, a), the skill encoder and q(z | phi(s)).

    The encoder has two optimizers: one for the skill-diversity loss and one fed by the
    policy's SAC objective. Both use the encoder learning rate.
    """

    def __init__(self, proprio_dim: int, act_dim: int, rng: np.random.Generator, n_skills: int = 10,
                 skill_dim: int = 7, sigma_z: float = 0.3, lr_encoder: float = 1e-5, init_std: float = 0.1,
                 normalize: str = "printed", hidden=(256, 256), gamma: float = 0.99, tau: float = 0.01,
                 lr_pi: float = 3e-4, lr_q: float = 3e-4, lr_alpha: float = 1e-4, lr_disc: float = 3e-4,
                 alpha_init: float = 0.1, target_entropy: float | None = None, twin: bool = True,
                 feature_map: str = "identity"):
        self.proprio_dim = proprio_dim
        self.act_dim = act_dim
        self.rng = rng
        self.encoder = SkillEncoder(n_skills, skill_dim, sigma_z, init_std, rng, normalize)
        self.sac = SacAgent(proprio_dim + skill_dim, act_dim, rng, hidden, gamma, tau, lr_pi, lr_q, lr_alpha,
                            alpha_init, target_entropy, twin, name="low")
        fmap = FEATURE_MAPS[feature_map]
        feat_dim = fmap(np.zeros((1, proprio_dim))).shape[-1]
        self.discriminator = Discriminator(feat_dim, n_skills, rng, hidden, fmap, lr_disc)
        self.sd_opt = Adam(self.encoder.parameters(), lr=lr_encoder)
        self.enc_sac_opt = Adam(self.encoder.parameters(), lr=lr_encoder)

    @classmethod
    def from_config(cls, cfg, rng: np.random.Generator) -> "LowLevelAgent":
        p, s = cfg.pretrain, cfg.skill
        return cls(3 + cfg.env.n_joints, cfg.env.n_joints, rng, s.n_skills, s.latent_dim, s.sigma_z, s.lr,
                   s.init_std, s.normalize, cfg.net.sizes, p.gamma, p.tau, p.lr_pi, p.lr_q, p.lr_alpha,
                   cfg.disc.lr, p.alpha_init, p.target_entropy, p.twin, cfg.disc.feature_map)

    @property
    def policy(self):
        return self.sac.policy

    def act(self, proprio, zc, rng=None, deterministic: bool = False) -> np.ndarray:
        obs = np.concatenate([np.atleast_2d(proprio), np.atleast_2d(zc)], axis=-1)
        return self.sac.act(obs, rng, deterministic)

    def skill_latent(self, z, noise) -> Tensor:
        """z^c = tanh(E(z) + sigma_z * noise), differentiable in the encoder table."""
        return (self.encoder.encode(z) + Tensor(np.asarray(noise, np.float32) * self.encoder.sigma_z)).tanh()

    # -- checkpoint groups ------------------------------------------------------
    def named_groups(self) -> dict[str, dict]:
        return {
            "z_encoder": self.encoder.named_parameters(),
            "discriminator": self.discriminator.named_parameters(),
            "low_policy": self.sac.policy.named_parameters(),
            "low_critic": self.sac.critic.named_parameters(),
            "temperature": self.sac.temperature.named_parameters(),
        }

    def state_groups(self) -> dict[str, dict[str, np.ndarray]]:
        return {g: params_to_group(named) for g, named in self.named_groups().items()}

    def load_groups(self, groups: dict) -> None:
        for g, named in self.named_groups().items():
            if g not in groups:
                raise KeyError(f"checkpoint lacks group {g!r}")
            load_group_into(named, groups[g], g)

    def parameters(self):
        return [p for named in self.named_groups().values() for p in named.values()]


def sd_update(agent: LowLevelAgent) -> float:
    agent.sd_opt.zero_grad()
    loss = sd_loss(agent.encoder)
    loss.backward()
    agent.sd_opt.step()
    return loss.item()


def sac_update_low(agent: LowLevelAgent, batch: dict) -> dict:
    """One SAC step on a low-level batch.

    The stored Gaussian noise rebuilds z^c from the current encoder; the next-state skill
    uses fresh noise. The encoder receives gradients only through the actor loss.
    """
    n = len(batch["r_a"])
    if n < 2:
        raise ValueError("sac_update_low needs a batch of at least 2 transitions")
    sac = agent.sac
    z = batch["z"]
    with no_grad():
        zc = agent.skill_latent(z, batch["noise"]).data
        zc_next = agent.skill_latent(z, agent.rng.standard_normal(zc.shape)).data
    obs = np.concatenate([batch["s"], zc], axis=1)
    next_obs = np.concatenate([batch["s_next"], zc_next], axis=1)
    target = sac.soft_target(batch["r_a"], next_obs, batch["done"])
    q_loss = sac.critic_step(np.concatenate([obs, batch["a"]], axis=1), target)

    zc_t = agent.skill_latent(z, batch["noise"])
    obs_t = concat([Tensor(np.asarray(batch["s"], np.float32)), zc_t], axis=1)
    pi_loss, logp = sac.actor_step(obs_t, extra_opts=(agent.enc_sac_opt,))
    a_loss = sac.temperature.update(logp)
    polyak_update(sac.critic, sac.tau)
    return {"critic": q_loss, "actor": pi_loss, "temperature": a_loss, "alpha": sac.temperature.alpha}
