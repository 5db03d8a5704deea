"""Soft actor-critic pieces shared by both levels of the hierarchy."""

from __future__ import annotations

import contextlib
import math
from typing import Callable

import numpy as np

from .nn import Adam, Mlp, copy_values
from .tensor import Tensor, concat, minimum, no_grad

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
LOG_FLOOR = math.log(1e-8)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
LOG2 = math.log(2.0)
INSIDE = float(np.nextafter(1.0, 0.0))


@contextlib.contextmanager
def frozen(params):
    """Stop gradients into ``params`` for the duration (saves the backward matmuls)."""
    params = list(params)
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, f in zip(params, flags):
            p.requires_grad = f


class GaussianPolicy:
    """tanh-squashed diagonal Gaussian head on an Mlp trunk."""

    def __init__(self, in_dim: int, action_dim: int, rng: np.random.Generator, hidden=(256, 256),
                 name: str = "policy"):
        self.action_dim = action_dim
        self.net = Mlp([in_dim, *hidden, 2 * action_dim], rng, activation="relu", name=name)

    @property
    def in_dim(self) -> int:
        return self.net.input_dim

    def parameters(self):
        return self.net.parameters()

    def named_parameters(self):
        return self.net.named_parameters()

    def dist(self, x: Tensor) -> tuple[Tensor, Tensor]:
        out = self.net(x)
        a = self.action_dim
        return out[:, :a], out[:, a:].clamp(LOG_STD_MIN, LOG_STD_MAX)

    def rsample(self, x: Tensor, eps: np.ndarray) -> tuple[Tensor, Tensor]:
        """Reparameterized action and its log-density (tanh change of variables included)."""
        mean, log_std = self.dist(x)
        pre = mean + log_std.exp() * eps
        action = pre.tanh()
        gauss = (log_std * -1.0 - HALF_LOG_2PI - 0.5 * eps * eps).sum(axis=-1)
        # log(1 - tanh(x)^2) = 2 * (log 2 - x - softplus(-2x))
        corr = ((LOG2 - pre - (pre * -2.0).softplus()) * 2.0).clamp(LOG_FLOOR, None).sum(axis=-1)
        return action, gauss - corr


def squashed_log_prob(mean: np.ndarray, log_std: np.ndarray, pre: np.ndarray) -> np.ndarray:
    eps = (pre - mean) / np.exp(log_std)
    gauss = (-log_std - HALF_LOG_2PI - 0.5 * eps * eps).sum(axis=-1)
    corr = np.maximum(2.0 * (LOG2 - pre - np.logaddexp(0.0, -2.0 * pre)), LOG_FLOOR).sum(axis=-1)
    return gauss - corr


def sample_action(policy: GaussianPolicy, state, rng: np.random.Generator | None, deterministic: bool = False):
    """Returns ``(action, log_prob)`` as arrays; deterministic mode emits tanh(mean)."""
    x = np.asarray(state, dtype=np.float32)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None]
    with no_grad():
        mean, log_std = policy.dist(Tensor(x))
    mean, log_std = mean.data.astype(np.float64), log_std.data.astype(np.float64)
    if deterministic:
        pre = mean
    else:
        pre = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    # tanh rounds to exactly +-1 past |x| ~ 19; keep actions in the open box
    action = np.clip(np.tanh(pre), -INSIDE, INSIDE)
    logp = squashed_log_prob(mean, log_std, pre)
    if squeeze:
        return action[0], float(logp[0])
    return action, logp


class TwinCritic:
    """Two Q networks (or one, when ``twin=False``) with Polyak-averaged target copies."""

    def __init__(self, in_dim: int, rng: np.random.Generator, hidden=(256, 256), twin: bool = True,
                 name: str = "critic"):
        n = 2 if twin else 1
        self.nets = [Mlp([in_dim, *hidden, 1], rng, name=f"{name}_q{i + 1}") for i in range(n)]
        self.targets = [Mlp([in_dim, *hidden, 1], rng, name=f"{name}_q{i + 1}_target") for i in range(n)]
        for t, q in zip(self.targets, self.nets):
            copy_values(t.parameters(), q.parameters())
            for p in t.parameters():
                p.requires_grad = False

    @property
    def twin(self) -> bool:
        return len(self.nets) == 2

    def parameters(self):
        return [p for q in self.nets for p in q.parameters()]

    def target_parameters(self):
        return [p for q in self.targets for p in q.parameters()]

    def named_parameters(self):
        out = {}
        for tag, group in (("q", self.nets), ("target", self.targets)):
            for i, net in enumerate(group):
                for k, p in net.named_parameters().items():
                    out[f"{tag}{i + 1}.{k}"] = p
        return out

    def __call__(self, x: Tensor) -> list[Tensor]:
        return [q(x).reshape(-1) for q in self.nets]

    def min_q(self, x: Tensor) -> Tensor:
        qs = self(x)
        return qs[0] if len(qs) == 1 else minimum(qs[0], qs[1])

    def min_target(self, x) -> np.ndarray:
        with no_grad():
            vals = [q(Tensor(x)).data.reshape(-1) for q in self.targets]
        return vals[0] if len(vals) == 1 else np.minimum(vals[0], vals[1])


def polyak_update(critic: TwinCritic, tau_bar: float) -> None:
    if not 0.0 <= tau_bar <= 1.0:
        raise ValueError("tau_bar must lie in [0, 1]")
    for t, p in zip(critic.target_parameters(), critic.parameters()):
        t.data = (tau_bar * p.data + (1.0 - tau_bar) * t.data).astype(t.data.dtype)


class Temperature:
    def __init__(self, alpha_init: float, target_entropy: float, lr: float = 1e-4):
        self.log_alpha = Tensor(np.array(math.log(alpha_init)), requires_grad=True, name="log_alpha")
        self.target_entropy = float(target_entropy)
        self.opt = Adam([self.log_alpha], lr=lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data))

    def parameters(self):
        return [self.log_alpha]

    def named_parameters(self):
        return {"log_alpha": self.log_alpha}

    def loss(self, log_prob: np.ndarray) -> Tensor:
        # d/dlog_alpha = mean(-log_prob) - target_entropy
        shift = float(np.mean(log_prob) + self.target_entropy)
        return self.log_alpha * (-shift)

    def update(self, log_prob: np.ndarray) -> float:
        self.opt.zero_grad()
        loss = self.loss(log_prob)
        loss.backward()
        self.opt.step()
        return loss.item()


class SacAgent:
    """Policy, critic and temperature for one flat SAC learner.

    ``update`` runs one critic step (1-step soft Bellman target with the min of the
    target twins), one reparameterized policy step, one temperature step and a Polyak
    update of the targets. Terminal flags mask the bootstrap; time-limit truncations
    must be passed as non-terminal.
    """

    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator, hidden=(256, 256),
                 gamma: float = 0.99, tau: float = 0.01, lr_pi: float = 3e-4, lr_q: float = 3e-4,
                 lr_alpha: float = 1e-4, alpha_init: float = 0.1, target_entropy: float | None = None,
                 twin: bool = True, critic_in_extra: int = 0, name: str = "low"):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.gamma = gamma
        self.tau = tau
        self.policy = GaussianPolicy(obs_dim, act_dim, rng, hidden, name=f"{name}_policy")
        self.critic = TwinCritic(obs_dim + act_dim + critic_in_extra, rng, hidden, twin, name=f"{name}_critic")
        self.temperature = Temperature(alpha_init, -act_dim if target_entropy is None else target_entropy, lr_alpha)
        self.pi_opt = Adam(self.policy.parameters(), lr=lr_pi)
        self.q_opt = Adam(self.critic.parameters(), lr=lr_q)
        self.rng = rng

    def act(self, obs, rng: np.random.Generator | None = None, deterministic: bool = False) -> np.ndarray:
        return sample_action(self.policy, obs, rng if rng is not None else self.rng, deterministic)[0]

    # -- pieces ---------------------------------------------------------------
    def soft_target(self, rew, next_obs, done) -> np.ndarray:
        eps = self.rng.standard_normal((len(rew), self.act_dim))
        with no_grad():
            a2, logp2 = self.policy.rsample(Tensor(next_obs), eps)
        q_next = self.critic.min_target(np.concatenate([next_obs, a2.data], axis=1))
        soft_v = q_next - self.temperature.alpha * logp2.data
        return (np.asarray(rew) + self.gamma * (1.0 - np.asarray(done, dtype=np.float64)) * soft_v).astype(np.float32)

    def critic_step(self, critic_in, target: np.ndarray) -> float:
        self.q_opt.zero_grad()
        qs = self.critic(critic_in if isinstance(critic_in, Tensor) else Tensor(critic_in))
        y = Tensor(target)
        loss = sum((((q - y) ** 2).mean() for q in qs), Tensor(0.0)) * (1.0 / len(qs))
        loss.backward()
        self.q_opt.step()
        return loss.item()

    def actor_step(self, obs_t: Tensor, extra_opts=()) -> tuple[float, np.ndarray]:
        self.pi_opt.zero_grad()
        for o in extra_opts:
            o.zero_grad()
        eps = self.rng.standard_normal((obs_t.shape[0], self.act_dim))
        action, logp = self.policy.rsample(obs_t, eps)
        with frozen(self.critic.parameters()):
            q = self.critic.min_q(concat([obs_t, action], axis=1))
            loss = (logp * self.temperature.alpha - q).mean()
            loss.backward()
        self.pi_opt.step()
        for o in extra_opts:
            o.step()
        return loss.item(), logp.data

    def update(self, obs, act, rew, next_obs, done) -> dict:
        target = self.soft_target(rew, next_obs, done)
        q_loss = self.critic_step(np.concatenate([obs, act], axis=1), target)
        pi_loss, logp = self.actor_step(Tensor(obs))
        a_loss = self.temperature.update(logp)
        polyak_update(self.critic, self.tau)
        return {"critic": q_loss, "actor": pi_loss, "temperature": a_loss, "alpha": self.temperature.alpha}

    def parameters(self):
        return self.policy.parameters() + self.critic.parameters() + self.temperature.parameters()


def run_episodes(env, act_fn: Callable, episodes: int, seed: int = 0, on_step: Callable | None = None) -> np.ndarray:
    """Run ``episodes`` episodes in batches of ``env.n`` and return each episode's summed reward.

    ``act_fn(obs, t)`` returns a batch of actions; task environments supply the reward.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    scores = []
    batch_seed = seed
    while len(scores) < episodes:
        obs = env.reset(batch_seed)
        batch_seed += 1
        alive = np.ones(env.n, dtype=bool)
        total = np.zeros(env.n)
        t = 0
        while alive.any():
            action = act_fn(obs, t)
            out = env.step(action)
            obs, reward, done = out if len(out) == 3 else (out[0], np.zeros(env.n), out[1])
            total += np.where(alive, reward, 0.0)
            if on_step is not None:
                on_step(obs, alive)
            alive &= ~done
            t += 1
        scores.extend(total.tolist())
    return np.asarray(scores[:episodes])


def evaluate_policy(agent: SacAgent, env, episodes: int = 50, seed: int = 0) -> float:
    """Mean undiscounted score of deterministic rollouts with a flat policy on ``s+``."""
    return float(run_episodes(env, lambda obs, t: agent.act(obs.s_plus, deterministic=True), episodes, seed).mean())
