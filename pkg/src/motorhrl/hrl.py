"""Step-conditioned semi-MDP critic and actor for the skill-selecting policy.

The high-level policy picks a continuous skill every ``k`` steps. Every primitive step
``t`` still yields a training tuple: the critic takes the within-interval step index
``i = t mod k`` and regresses onto the discounted rewards left in the interval plus a
bootstrap from the state where the next decision is taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import Adam
from .replay import HighBatch
from .sac import GaussianPolicy, Temperature, TwinCritic, frozen, polyak_update, sample_action
from .tensor import Tensor, concat, no_grad


@dataclass(frozen=True)
class HrlConfig:
    k: int = 3
    gamma: float = 0.99

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("action interval k must be >= 1")

    @property
    def gamma_h(self) -> float:
        return self.gamma**self.k


@dataclass
class HighWindow:
    states_plus: np.ndarray     # (len, D) s+ for each step in the window
    skill: np.ndarray           # (d,)
    step_index: int
    rewards: np.ndarray         # (len,)
    terminal: bool
    bootstrap_state: np.ndarray  # (D,)
    start: int = 0


@dataclass
class Episode:
    """One logged high-level trajectory: ``s_plus`` has T+1 rows, the rest T."""

    s_plus: np.ndarray
    skills: np.ndarray
    rewards: np.ndarray
    terminal: bool
    step_index: np.ndarray | None = field(default=None)

    def __len__(self) -> int:
        return len(self.rewards)


def _check_window(w: HighWindow, k: int) -> None:
    if not 0 <= w.step_index < k:
        raise ValueError(f"step index {w.step_index} outside [0, {k})")
    n = len(w.rewards)
    if n == 0 or n > k - w.step_index:
        raise ValueError(f"window carries {n} rewards; expected 1..{k - w.step_index}")
    if n < k - w.step_index and not w.terminal:
        raise ValueError("short window without a terminal")


def q_target(window: HighWindow, value_fn, gamma: float, k: int) -> float:
    """G' = sum_j gamma^j R_{t+j} + gamma^(k-i) V(s+_{t+k-i}); bootstrap dropped at a terminal."""
    _check_window(window, k)
    r = np.asarray(window.rewards, dtype=np.float64)
    g = float(np.sum(gamma ** np.arange(len(r)) * r))
    if not window.terminal:
        g += gamma ** (k - window.step_index) * float(value_fn(window.bootstrap_state))
    return g


def q_targets_batch(batch: HighBatch, values: np.ndarray, gamma: float, k: int) -> np.ndarray:
    """Vectorized ``q_target`` over a sampled batch; ``values`` = V(batch.bootstrap)."""
    disc = gamma ** np.arange(k)
    g = (batch.rewards * disc).sum(axis=1)
    boot = np.where(batch.terminal, 0.0, gamma ** (k - batch.i) * values)
    return g + boot


def expand_windows(episode: Episode, k: int) -> list[HighWindow]:
    """All usable step-conditioned tuples of one episode.

    Starts ``t`` whose k-step span lies inside the episode are kept (T-(k-1) of them);
    when the episode ended in a true terminal, the trailing starts are kept too, with
    rewards cut at the terminal and the bootstrap masked.
    """
    T = len(episode)
    if T < 1:
        raise ValueError("episode must contain at least one step")
    idx = episode.step_index if episode.step_index is not None else np.arange(T) % k
    out = []
    for t in range(T):
        if t + k - 1 > T - 1 and not episode.terminal:
            break
        i = int(idx[t])
        end = min(t + k - i, T)  # exclusive
        skills = episode.skills[t:end]
        if not np.all(skills == skills[0]):
            raise ValueError(f"skill changed inside the window starting at t={t}")
        hit_terminal = episode.terminal and end == T
        out.append(HighWindow(
            states_plus=episode.s_plus[t:end],
            skill=episode.skills[t],
            step_index=i,
            rewards=episode.rewards[t:end],
            terminal=hit_terminal,
            bootstrap_state=episode.s_plus[end],
            start=t,
        ))
    return out


def windows_to_batch(windows: list[HighWindow], k: int) -> HighBatch:
    n = len(windows)
    rewards = np.zeros((n, k))
    for j, w in enumerate(windows):
        rewards[j, : len(w.rewards)] = w.rewards
    return HighBatch(
        s_plus=np.stack([w.states_plus[0] for w in windows]).astype(np.float32),
        z_c=np.stack([w.skill for w in windows]).astype(np.float32),
        i=np.array([w.step_index for w in windows], np.int64),
        rewards=rewards,
        n_rewards=np.array([len(w.rewards) for w in windows], np.int64),
        terminal=np.array([w.terminal for w in windows], bool),
        bootstrap=np.stack([w.bootstrap_state for w in windows]).astype(np.float32),
    )


def step_onehot(i: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(i), k), np.float32)
    out[np.arange(len(i)), np.asarray(i, np.int64)] = 1.0
    return out


class HighLevelAgent:
    """Skill-selecting policy psi(z^c | s+) with a step-conditioned twin critic Q(s+, z^c, i)."""

    def __init__(self, splus_dim: int, skill_dim: int, k: int, rng: np.random.Generator, hidden=(256, 256),
                 gamma: float = 0.99, tau: float = 0.005, lr_pi: float = 3e-4, lr_q: float = 3e-4,
                 lr_alpha: float = 1e-4, alpha_init: float = 0.1, target_entropy: float | None = None,
                 twin: bool = True, value_samples: int = 1):
        self.cfg = HrlConfig(k=k, gamma=gamma)
        self.k = k
        self.skill_dim = skill_dim
        self.tau = tau
        self.value_samples = value_samples
        self.policy = GaussianPolicy(splus_dim, skill_dim, rng, hidden, name="high_policy")
        self.critic = TwinCritic(splus_dim + skill_dim + k, rng, hidden, twin, name="high_critic")
        self.temperature = Temperature(alpha_init, -skill_dim if target_entropy is None else target_entropy,
                                       lr_alpha)
        self.pi_opt = Adam(self.policy.parameters(), lr=lr_pi)
        self.q_opt = Adam(self.critic.parameters(), lr=lr_q)
        self.rng = rng

    def act(self, s_plus, rng=None, deterministic: bool = False) -> np.ndarray:
        return sample_action(self.policy, s_plus, rng if rng is not None else self.rng, deterministic)[0]

    def critic_input(self, s_plus, z_c, i) -> np.ndarray:
        return np.concatenate([s_plus, z_c, step_onehot(i, self.k)], axis=1).astype(np.float32)

    def value(self, s_plus: np.ndarray, use_target: bool = True) -> np.ndarray:
        """Single-sample estimate of E_z~psi[Q(s+, z, 0) - alpha log psi(z | s+)]."""
        s_plus = np.asarray(s_plus, np.float32)
        total = np.zeros(len(s_plus))
        for _ in range(self.value_samples):
            eps = self.rng.standard_normal((len(s_plus), self.skill_dim))
            with no_grad():
                z, logp = self.policy.rsample(Tensor(s_plus), eps)
            x = self.critic_input(s_plus, z.data, np.zeros(len(s_plus), np.int64))
            if use_target:
                q = self.critic.min_target(x)
            else:
                with no_grad():
                    q = self.critic.min_q(Tensor(x)).data
            total += q - self.temperature.alpha * logp.data
        return total / self.value_samples

    def parameters(self):
        return self.policy.parameters() + self.critic.parameters() + self.temperature.parameters()


def value(state_plus, agent: HighLevelAgent) -> np.ndarray:
    return agent.value(np.atleast_2d(state_plus))


def sac_update_high(agent: HighLevelAgent, batch: HighBatch) -> dict:
    k, gamma = agent.k, agent.cfg.gamma
    v_boot = agent.value(batch.bootstrap)
    target = q_targets_batch(batch, v_boot, gamma, k).astype(np.float32)

    agent.q_opt.zero_grad()
    qs = agent.critic(Tensor(agent.critic_input(batch.s_plus, batch.z_c, batch.i)))
    y = Tensor(target)
    q_loss = sum((((q - y) ** 2).mean() * 0.5 for q in qs), Tensor(0.0)) * (1.0 / len(qs))
    q_loss.backward()
    agent.q_opt.step()

    agent.pi_opt.zero_grad()
    s = Tensor(batch.s_plus)
    eps = agent.rng.standard_normal((len(batch), agent.skill_dim))
    z, logp = agent.policy.rsample(s, eps)
    with frozen(agent.critic.parameters()):
        x = concat([s, z, Tensor(step_onehot(np.zeros(len(batch), np.int64), k))], axis=1)
        pi_loss = (logp * agent.temperature.alpha - agent.critic.min_q(x)).mean()
        pi_loss.backward()
    agent.pi_opt.step()

    a_loss = agent.temperature.update(logp.data)
    polyak_update(agent.critic, agent.tau)
    return {"critic": q_loss.item(), "actor": pi_loss.item(), "temperature": a_loss,
            "alpha": agent.temperature.alpha}
