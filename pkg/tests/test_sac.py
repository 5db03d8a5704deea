import math

import numpy as np
import pytest

from motorhrl.sac import (
    GaussianPolicy,
    SacAgent,
    Temperature,
    TwinCritic,
    evaluate_policy,
    polyak_update,
    run_episodes,
    sample_action,
)
from motorhrl.tensor import Tensor, no_grad


def zero_mean_policy(rng, log_std):
    pol = GaussianPolicy(3, 2, rng, hidden=(8,))
    w, b, _ = pol.net.layers[-1]
    w.data[:] = 0
    b.data[:] = 0
    b.data[2:] = log_std
    return pol


def test_near_deterministic_policy_emits_zero(rng):
    pol = zero_mean_policy(rng, -20.0)
    a, _ = sample_action(pol, np.zeros(3), rng)
    np.testing.assert_allclose(a, 0.0, atol=1e-7)


def test_actions_inside_box(rng):
    pol = zero_mean_policy(rng, 2.0)
    a, _ = sample_action(pol, rng.standard_normal((500, 3)), rng)
    assert np.all(np.abs(a) < 1)


def test_log_std_is_clamped(rng):
    pol = zero_mean_policy(rng, 50.0)
    _, log_std = pol.dist(Tensor(np.zeros((1, 3))))
    assert np.all(log_std.data == 2.0)


def test_log_prob_matches_density_oracle(rng):
    pol = GaussianPolicy(3, 2, rng, hidden=(16,))
    s = rng.standard_normal((200, 3))
    a, logp = sample_action(pol, s, np.random.default_rng(4))
    with no_grad():
        mean, log_std = (t.data.astype(np.float64) for t in pol.dist(Tensor(s)))
    u = np.arctanh(a)
    sd = np.exp(log_std)
    gauss = np.sum(-0.5 * ((u - mean) / sd) ** 2 - np.log(sd) - 0.5 * math.log(2 * math.pi), axis=1)
    oracle = gauss - np.sum(np.log(1 - a**2), axis=1)
    np.testing.assert_allclose(logp, oracle, atol=1e-5)


def test_rsample_matches_numpy_log_prob(rng):
    pol = GaussianPolicy(3, 2, rng, hidden=(16,))
    s = rng.standard_normal((50, 3))
    eps = rng.standard_normal((50, 2))
    a, logp = pol.rsample(Tensor(s), eps)
    mean, log_std = pol.dist(Tensor(s))
    u = mean.data + np.exp(log_std.data) * eps
    sd = np.exp(log_std.data)
    ref = np.sum(-0.5 * eps**2 - np.log(sd) - 0.5 * math.log(2 * math.pi), axis=1) - np.sum(np.log(1 - np.tanh(u) ** 2), axis=1)
    np.testing.assert_allclose(logp.data, ref, atol=1e-3)


def test_deterministic_eval_ignores_rng(rng):
    pol = GaussianPolicy(3, 2, rng, hidden=(8,))
    s = rng.standard_normal((4, 3))
    a1, _ = sample_action(pol, s, np.random.default_rng(0), deterministic=True)
    a2, _ = sample_action(pol, s, np.random.default_rng(99), deterministic=True)
    np.testing.assert_array_equal(a1, a2)


def test_polyak(rng):
    critic = TwinCritic(2, rng, hidden=(4,))
    for p in critic.parameters():
        p.data[:] = 1.0
    for t in critic.target_parameters():
        t.data[:] = 0.0
    polyak_update(critic, 0.01)
    assert all(np.allclose(t.data, 0.01) for t in critic.target_parameters())
    polyak_update(critic, 0.0)
    assert all(np.allclose(t.data, 0.01) for t in critic.target_parameters())
    polyak_update(critic, 1.0)
    assert all(np.array_equal(t.data, p.data) for t, p in zip(critic.target_parameters(), critic.parameters()))
    with pytest.raises(ValueError):
        polyak_update(critic, 1.5)


def test_target_uses_min_of_twins(rng):
    agent = SacAgent(3, 2, rng, hidden=(16,), gamma=0.9)
    t2 = agent.critic.targets[1]
    t2.layers[-1][1].data += 5.0  # second twin is much more optimistic
    obs = rng.standard_normal((32, 3)).astype(np.float32)
    rew = rng.standard_normal(32)
    done = np.zeros(32)
    agent.rng = np.random.default_rng(11)
    target = agent.soft_target(rew, obs, done)
    eps = np.random.default_rng(11).standard_normal((32, 2))
    with no_grad():
        a2, logp = agent.policy.rsample(Tensor(obs), eps)
        x = Tensor(np.concatenate([obs, a2.data], axis=1))
        q1, q2 = (q(x).data.reshape(-1) for q in agent.critic.targets)
    assert np.all(q1 < q2)
    expect = rew + 0.9 * (np.minimum(q1, q2) - agent.temperature.alpha * logp.data)
    np.testing.assert_allclose(target, expect, rtol=1e-5, atol=1e-5)


def test_terminal_masks_bootstrap(rng):
    agent = SacAgent(3, 2, rng, hidden=(8,), gamma=0.99)
    target = agent.soft_target(np.array([0.5, 0.5]), rng.standard_normal((2, 3)), np.array([True, True]))
    np.testing.assert_allclose(target, 0.5)


def test_gamma_zero_critic_loss_is_mean_square(rng):
    agent = SacAgent(3, 2, rng, hidden=(8,), gamma=0.0)
    obs = rng.standard_normal((16, 3)).astype(np.float32)
    act = rng.uniform(-1, 1, (16, 2)).astype(np.float32)
    x = np.concatenate([obs, act], axis=1)
    with no_grad():
        q1, q2 = (q.data for q in agent.critic(Tensor(x)))
    target = agent.soft_target(np.zeros(16), obs, np.zeros(16))
    assert np.all(target == 0)
    loss = agent.critic_step(x, target)
    assert loss == pytest.approx((np.mean(q1**2) + np.mean(q2**2)) / 2, rel=1e-5)


def test_temperature_sign():
    temp = Temperature(0.1, target_entropy=-2.0, lr=1e-2)
    temp.update(np.full(8, 5.0))  # entropy estimate -5 < -2: raise alpha
    assert temp.alpha > 0.1
    temp = Temperature(0.1, target_entropy=-2.0, lr=1e-2)
    temp.update(np.full(8, -5.0))
    assert temp.alpha < 0.1


def test_bandit_q_converges_to_reward():
    rng = np.random.default_rng(0)
    agent = SacAgent(1, 1, rng, hidden=(32, 32), gamma=0.0, lr_q=1e-3)
    obs = np.ones((64, 1), np.float32)
    for _ in range(5000):
        act = agent.act(obs)
        agent.update(obs, act, np.ones(64), obs, np.zeros(64))
    with no_grad():
        q = agent.critic.min_q(Tensor(np.concatenate([obs, agent.act(obs)], axis=1))).data
    assert np.all(np.abs(q - 1.0) < 0.01)


def test_gamma_zero_q_matches_bin_means():
    # fixed dataset over 3 states x 2 action bins with noisy rewards; oracle = per-bin empirical mean
    rng = np.random.default_rng(1)
    n = 3000
    s = rng.integers(0, 3, n)
    a_bin = rng.integers(0, 2, n)
    means = np.array([[0.2, -0.5], [1.0, 0.3], [-0.8, 0.6]])
    r = means[s, a_bin] + 0.3 * rng.standard_normal(n)
    obs = (s[:, None] - 1.0).astype(np.float32)
    act = np.where(a_bin == 0, -0.5, 0.5)[:, None].astype(np.float32)
    agent = SacAgent(1, 1, rng, hidden=(32, 32), gamma=0.0, lr_q=1e-3)
    x = np.concatenate([obs, act], axis=1)
    for _ in range(3000):
        idx = rng.integers(0, n, 256)
        agent.critic_step(x[idx], r[idx].astype(np.float32))
    oracle = np.array([[r[(s == i) & (a_bin == j)].mean() for j in range(2)] for i in range(3)])
    grid = np.array([[i - 1.0, -0.5 if j == 0 else 0.5] for i in range(3) for j in range(2)], np.float32)
    with no_grad():
        q = agent.critic.min_q(Tensor(grid)).data.reshape(3, 2)
    assert np.max(np.abs(q - oracle)) < 0.05


class _Doomed:
    """Every episode ends at its first step with -1."""

    n = 4

    def reset(self, seed):
        return type("O", (), {"s_plus": np.zeros((self.n, 3))})()

    def step(self, action):
        return self.reset(None), np.full(self.n, -1.0), np.ones(self.n, bool)


def test_evaluate_policy_on_immediate_failure(rng):
    agent = SacAgent(3, 2, rng, hidden=(8,))
    assert evaluate_policy(agent, _Doomed(), episodes=50) == -1.0
    with pytest.raises(ValueError):
        run_episodes(_Doomed(), lambda o, t: None, 0)


def test_evaluate_policy_is_repeatable(rng):
    from motorhrl.envs import TaskEnv, TaskSpec

    agent = SacAgent(6 + 4, 3, rng, hidden=(16,))
    env = TaskEnv(TaskSpec(kind="hurdles", horizon=60), n=5, seed=0)
    assert evaluate_policy(agent, env, 10, seed=3) == evaluate_policy(agent, env, 10, seed=3)
