import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motorhrl.envs import (
    ROBOT_WEIGHTS,
    BodyParams,
    EnvObservation,
    Locomotor,
    MotorRewardWeights,
    TaskEnv,
    TaskSpec,
    make_env,
    motor_reward,
    reset,
    step,
    task_step,
)


def obs(v, u, fallen):
    one = lambda x: np.atleast_1d(np.asarray(x))
    return EnvObservation(np.zeros((1, 6)), np.zeros((1, 0)), one(v), one(u), one(fallen), one(False))


def test_motor_reward_examples():
    assert motor_reward(obs(1.0, 0.5, False), ROBOT_WEIGHTS["walker"])[0] == pytest.approx(0.95)
    assert motor_reward(obs(0.0, 0.0, False), ROBOT_WEIGHTS["quadruped"])[0] == pytest.approx(0.1)
    w = MotorRewardWeights(2.0, 0.1, 0.7)
    assert motor_reward(obs(0.3, 2.0, True), w)[0] == pytest.approx(2.0 * 0.3 - 0.1 * 2.0)


def test_reset_is_deterministic():
    a, b = Locomotor(n=3, seed=None), Locomotor(n=3, seed=None)
    o1, o2 = reset(a, 5), reset(b, 5)
    np.testing.assert_array_equal(o1.proprio, o2.proprio)
    assert not o1.fallen.any()
    assert o1.extern.shape == (3, 0)


def test_zero_action_decays():
    env = Locomotor(n=1, seed=0)
    env.reset()
    env.vel[:] = 0.8
    speeds = []
    for _ in range(30):
        o, done = step(env, np.zeros((1, 3)))
        speeds.append(o.forward_velocity[0])
        assert not done[0]
    assert np.all(np.diff(np.abs(speeds)) <= 0) and abs(speeds[-1]) < 0.01


def test_full_thrust_approaches_terminal_velocity():
    # joints converge to the command, so v -> thrust . 1 = 1.0 from below
    env = Locomotor(n=1, seed=0, body=BodyParams(init_noise=0.0))
    env.reset()
    v = []
    for _ in range(80):
        o, _ = env.step(np.ones((1, 3)))
        v.append(o.forward_velocity[0])
    v = np.array(v)
    assert np.all(np.diff(v) > 0) and np.all(v < 1.0)
    assert v[-1] == pytest.approx(1.0, abs=1e-4)


def test_velocity_recursion_closed_form():
    # with joints pinned at the command: v_t = 1 - 0.8^t (explicit Euler, drag 0.2)
    env = Locomotor(n=1, seed=0, body=BodyParams(init_noise=0.0, joint_gain=1.0))
    env.reset()
    for t in range(1, 20):
        o, _ = env.step(np.ones((1, 3)))
        assert o.forward_velocity[0] == pytest.approx(1 - 0.8**t, rel=1e-12)


def test_tilting_posture_falls():
    env = Locomotor(n=1, seed=0)
    env.reset()
    for _ in range(100):
        o, done = env.step(np.array([[1.0, -1.0, 1.0]]))
        if done[0]:
            break
    assert o.fallen[0] and done[0] and env.t[0] < 100


def test_horizon_truncates():
    env = Locomotor(n=2, horizon=7, seed=0)
    env.reset()
    for t in range(7):
        o, done = env.step(np.zeros((2, 3)))
    assert done.all() and o.truncated.all() and not o.fallen.any()


def test_out_of_range_actions_are_clamped():
    env = Locomotor(n=1, seed=0)
    env.reset()
    o, _ = env.step(np.array([[3.0, 0.0, -2.0]]))
    assert env.clamp_count == 2
    assert o.control_cost[0] == pytest.approx(2.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_same_seed_same_trajectory(seed):
    acts = np.random.default_rng(seed).uniform(-1, 1, (40, 2, 3))
    runs = []
    for _ in range(2):
        env = make_env("hurdles", n=2, horizon=40, seed=seed)
        env.reset()
        runs.append(np.concatenate([np.concatenate([o.s_plus, r[:, None]], 1) for o, r, _ in map(env.step, acts)]))
    np.testing.assert_array_equal(runs[0], runs[1])


def test_motor_reward_replay_oracle():
    env = Locomotor(n=3, seed=1)
    env.reset()
    w = ROBOT_WEIGHTS["humanoid"]
    for a in np.random.default_rng(0).uniform(-1, 1, (50, 3, 3)):
        o, _ = env.step(a)
        expect = [w.w_v * o.forward_velocity[i] - w.w_c * np.sum(a[i] ** 2) + w.w_f * (not o.fallen[i]) for i in range(3)]
        np.testing.assert_allclose(motor_reward(o, w), expect, rtol=1e-12)


@pytest.mark.parametrize("kind", ["hurdles", "goals", "vtrack", "limbos", "gaps", "stairs-lite"])
def test_task_rewards_are_sparse(kind):
    env = TaskEnv(TaskSpec(kind=kind, horizon=300), n=4, seed=3)
    env.reset()
    rng = np.random.default_rng(0)
    negatives = np.zeros(4, int)
    alive = np.ones(4, bool)
    a = np.tile([1.0, 1.0, 1.0], (4, 1))
    for t in range(300):
        o, r, done = task_step(env, np.clip(a + 0.3 * rng.standard_normal(a.shape), -1, 1))
        assert set(np.unique(r[alive])) <= {-1.0, 0.0, 1.0}
        assert np.all(done[(r == -1) & alive])
        negatives += (r == -1) & alive
        alive &= ~done
    assert np.all(negatives <= 1)
    assert o.extern.shape == (4, env.extern_dim)


def test_idle_step_gives_zero():
    env = TaskEnv(TaskSpec(kind="hurdles"), n=1, seed=0)
    env.reset()
    _, r, done = env.step(np.zeros((1, 3)))
    assert r[0] == 0 and not done[0]


def test_fall_gives_minus_one():
    env = TaskEnv(TaskSpec(kind="goals"), n=1, seed=0)
    env.reset()
    for _ in range(100):
        _, r, done = env.step(np.array([[1.0, -1.0, 1.0]]))
        if done[0]:
            break
    assert r[0] == -1 and done[0]


def test_vtrack_in_band_every_step_scores_horizon():
    # drag 0 keeps the velocity we set, so every step is inside the band
    env = TaskEnv(TaskSpec(kind="vtrack", horizon=1000), n=1, body=BodyParams(drag=0.0), seed=0)
    env.reset()
    total, targets = 0.0, set()
    for _ in range(1000):
        env.vel[:] = env.v_target
        targets.add(float(env.v_target[0]))
        _, r, done = env.step(np.zeros((1, 3)))
        total += r[0]
    assert done[0] and total == 1000
    assert targets <= {0.2, 0.4, 0.6, 0.8}


def test_hurdle_needs_raised_first_joint():
    spec = TaskSpec(kind="hurdles", first_obstacle=0.5, height_range=(0.4, 0.4))
    high, low = TaskEnv(spec, n=1, seed=0), TaskEnv(spec, n=1, seed=0)
    for env, act in ((high, [1.0, 1.0, 1.0]), (low, [0.0, 1.0, 1.0])):
        env.reset()
        env.joints[:] = act
        env.vel[:] = 1.0
        _, r, done = env.step(np.array([act]))
        env_r = (r[0], done[0])
        if env is high:
            assert env_r == (1.0, False)
        else:
            assert env_r == (-1.0, True)


def test_goals_touch_respawns_target():
    env = TaskEnv(TaskSpec(kind="goals"), n=1, seed=0)
    env.reset()
    env.goal[:] = env.pos + np.array([[0.5, 0.0]])
    before = env.goal.copy()
    _, r, _ = env.step(np.zeros((1, 3)))
    assert r[0] == 1.0
    assert not np.allclose(env.goal, before)
    d = np.linalg.norm(env.goal - env.pos)
    assert 3.0 <= d <= 8.0


def test_unknown_task():
    with pytest.raises(ValueError):
        TaskSpec(kind="parkour")
