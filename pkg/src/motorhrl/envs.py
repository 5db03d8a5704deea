"""Deterministic toy locomotor environments, vectorized over ``n`` independent bodies.

The body is a planar point mass with heading, a tilt angle and ``J`` position-controlled
joints. Joint posture drives forward thrust, yaw and tilt through a fixed gait matrix;
velocities follow an explicit-Euler linear-drag recursion. ``|tilt| > fall_tilt`` is a
fall. The basic environment exposes proprioception only; task environments add a
fixed-length egocentric external observation and sparse +1 / -1 / 0 rewards.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TASK_KINDS = ("hurdles", "goals", "vtrack", "limbos", "gaps", "stairs-lite")


@dataclass(frozen=True)
class BodyParams:
    n_joints: int = 3
    joint_gain: float = 0.5
    drag: float = 0.2
    thrust: tuple[float, ...] = (0.5, 0.3, 0.2)
    turn: tuple[float, ...] = (0.0, 0.5, -0.5)
    tilt: tuple[float, ...] = (0.3, -0.3, 0.3)
    turn_scale: float = 0.1
    tilt_rate: float = 0.1
    fall_tilt: float = 0.6
    init_noise: float = 0.01

    def gait_matrix(self) -> np.ndarray:
        g = np.array([self.thrust, self.turn, self.tilt], dtype=np.float64)
        if g.shape != (3, self.n_joints):
            raise ValueError(f"gait rows must have n_joints={self.n_joints} entries")
        return g


@dataclass(frozen=True)
class MotorRewardWeights:
    w_v: float = 1.0
    w_c: float = 0.1
    w_f: float = 0.0


# per-robot columns of the pre-training hyper-parameter table
ROBOT_WEIGHTS = {
    "cheetah": MotorRewardWeights(0.5, 0.1, 0.0),
    "walker": MotorRewardWeights(1.0, 0.1, 0.0),
    "quadruped": MotorRewardWeights(2.0, 0.1, 0.1),
    "humanoid": MotorRewardWeights(2.0, 0.1, 0.1),
}


@dataclass
class EnvObservation:
    """Batched observation; every field has leading dimension ``n``."""

    proprio: np.ndarray
    extern: np.ndarray
    forward_velocity: np.ndarray
    control_cost: np.ndarray
    fallen: np.ndarray
    truncated: np.ndarray

    @property
    def s_plus(self) -> np.ndarray:
        return np.concatenate([self.proprio, self.extern], axis=-1)

    def row(self, i: int) -> "EnvObservation":
        return EnvObservation(*(np.asarray(getattr(self, f))[i : i + 1] for f in _OBS_FIELDS))


_OBS_FIELDS = ("proprio", "extern", "forward_velocity", "control_cost", "fallen", "truncated")


def motor_reward(obs: EnvObservation, weights: MotorRewardWeights) -> np.ndarray:
    """w_v * v_x - w_c * u^2 + w_f * [not fallen]."""
    upright = (~np.asarray(obs.fallen, dtype=bool)).astype(np.float64)
    return (
        weights.w_v * np.asarray(obs.forward_velocity, dtype=np.float64)
        - weights.w_c * np.asarray(obs.control_cost, dtype=np.float64)
        + weights.w_f * upright
    )


class Locomotor:
    """Basic environment: the body alone, proprioceptive observation, no task reward."""

    extern_dim = 0

    def __init__(self, n: int = 1, horizon: int = 100, body: BodyParams = BodyParams(), seed: int | None = 0):
        self.n = n
        self.horizon = horizon
        self.body = body
        self.gait = body.gait_matrix()
        self.act_dim = body.n_joints
        self.obs_dim = 3 + body.n_joints
        self.clamp_count = 0
        self._rng = np.random.default_rng(seed)
        self._alloc()
        self._last_u = np.zeros(n)

    # -- state ------------------------------------------------------------------
    def _alloc(self):
        n, j = self.n, self.body.n_joints
        self.pos = np.zeros((n, 2))
        self.heading = np.zeros(n)
        self.vel = np.zeros(n)
        self.yaw_rate = np.zeros(n)
        self.tilt = np.zeros(n)
        self.joints = np.zeros((n, j))
        self.t = np.zeros(n, dtype=np.int64)
        self.fallen = np.zeros(n, dtype=bool)

    def _init_rows(self, mask: np.ndarray):
        k = int(mask.sum())
        if k == 0:
            return
        noise = self.body.init_noise
        self.pos[mask] = 0.0
        self.heading[mask] = 0.0
        self.vel[mask] = 0.0
        self.yaw_rate[mask] = 0.0
        self.tilt[mask] = self._rng.uniform(-noise, noise, k)
        self.joints[mask] = self._rng.uniform(-noise, noise, (k, self.body.n_joints))
        self.t[mask] = 0
        self.fallen[mask] = False
        self._last_u[mask] = 0.0
        self._task_reset(mask)

    def _task_reset(self, mask: np.ndarray):
        pass

    def reset(self, seed: int | None = None) -> EnvObservation:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._init_rows(np.ones(self.n, dtype=bool))
        return self._observe(np.zeros(self.n, dtype=bool))

    def reset_where(self, mask: np.ndarray, obs: EnvObservation) -> EnvObservation:
        """Reset the flagged bodies in place; returns the merged observation."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            return obs
        self._init_rows(mask)
        fresh = self._observe(np.zeros(self.n, dtype=bool))
        merged = EnvObservation(*(np.array(getattr(obs, f), copy=True) for f in _OBS_FIELDS))
        for f in _OBS_FIELDS:
            getattr(merged, f)[mask] = getattr(fresh, f)[mask]
        return merged

    def extern(self) -> np.ndarray:
        return np.zeros((self.n, 0))

    def _observe(self, truncated: np.ndarray) -> EnvObservation:
        proprio = np.concatenate(
            [self.vel[:, None], 10.0 * self.yaw_rate[:, None], self.tilt[:, None], self.joints], axis=1
        )
        return EnvObservation(
            proprio=proprio.astype(np.float32),
            extern=self.extern().astype(np.float32),
            forward_velocity=self.vel.copy(),
            control_cost=self._last_u.copy(),
            fallen=self.fallen.copy(),
            truncated=truncated,
        )

    # -- dynamics ---------------------------------------------------------------
    def _advance(self, action: np.ndarray):
        a = np.asarray(action, dtype=np.float64).reshape(self.n, self.act_dim)
        outside = np.abs(a) > 1.0
        if outside.any():
            self.clamp_count += int(outside.sum())
            a = np.clip(a, -1.0, 1.0)
        b = self.body
        self.joints = self.joints + b.joint_gain * (a - self.joints)
        drive = self.joints @ self.gait.T  # (n, 3): thrust, turn, tilt
        self.vel = (1.0 - b.drag) * self.vel + b.drag * drive[:, 0]
        self.yaw_rate = (1.0 - b.drag) * self.yaw_rate + b.drag * b.turn_scale * drive[:, 1]
        self.heading = self.heading + self.yaw_rate
        self.tilt = (1.0 - b.tilt_rate) * self.tilt + b.tilt_rate * drive[:, 2]
        self.pos = self.pos + self.vel[:, None] * np.stack([np.cos(self.heading), np.sin(self.heading)], axis=1)
        self._last_u = (a * a).sum(axis=1)
        self.t = self.t + 1
        self.fallen = self.fallen | (np.abs(self.tilt) > b.fall_tilt)

    def step(self, action) -> tuple[EnvObservation, np.ndarray]:
        self._advance(action)
        truncated = (self.t >= self.horizon) & ~self.fallen
        done = self.fallen | truncated
        return self._observe(truncated), done


# -- task environments -----------------------------------------------------------


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "goals"
    horizon: int = 1000
    # obstacle courses (hurdles, gaps, limbos, stairs-lite)
    spacing: float = 12.0
    spacing_jitter: float = 3.0
    first_obstacle: float = 8.0
    height_range: tuple[float, float] = (0.3, 0.6)
    gap_speed: float = 0.5
    # goals
    goal_radius: float = 1.0
    goal_distance: tuple[float, float] = (3.0, 8.0)
    # vtrack
    target_speeds: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    speed_band: float = 0.1
    speed_interval: int = 250

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; expected one of {TASK_KINDS}")


class TaskEnv(Locomotor):
    """Body plus task; ``step`` returns ``(obs, reward, done)`` with reward in {-1, 0, +1}."""

    N_OBSTACLES = 64

    def __init__(self, spec: TaskSpec, n: int = 1, body: BodyParams = BodyParams(), seed: int | None = 0):
        self.spec = spec
        super().__init__(n=n, horizon=spec.horizon, body=body, seed=seed)
        self.extern_dim = {"goals": 3, "vtrack": 1}.get(spec.kind, 4)
        self.score = np.zeros(n)

    def _alloc(self):
        super()._alloc()
        n = self.n
        self.obstacle_x = np.zeros((n, self.N_OBSTACLES))
        self.obstacle_h = np.zeros((n, self.N_OBSTACLES))
        self.next_obstacle = np.zeros(n, dtype=np.int64)
        self.goal = np.zeros((n, 2))
        self.v_target = np.zeros(n)

    def _task_reset(self, mask):
        k = int(mask.sum())
        s = self.spec
        rng = self._rng
        if s.kind == "goals":
            self.goal[mask] = self._sample_goal(self.pos[mask], k)
        elif s.kind == "vtrack":
            self.v_target[mask] = rng.choice(np.asarray(s.target_speeds), k)
        else:
            gaps = s.spacing + rng.uniform(-s.spacing_jitter, s.spacing_jitter, (k, self.N_OBSTACLES))
            gaps[:, 0] = s.first_obstacle
            self.obstacle_x[mask] = np.cumsum(gaps, axis=1)
            self.obstacle_h[mask] = rng.uniform(*s.height_range, (k, self.N_OBSTACLES))
            self.next_obstacle[mask] = 0
        if hasattr(self, "score"):
            self.score[mask] = 0.0

    def _sample_goal(self, origin: np.ndarray, k: int) -> np.ndarray:
        lo, hi = self.spec.goal_distance
        d = self._rng.uniform(lo, hi, k)
        ang = self._rng.uniform(-np.pi, np.pi, k)
        return origin + np.stack([d * np.cos(ang), d * np.sin(ang)], axis=1)

    def extern(self) -> np.ndarray:
        s = self.spec
        if s.kind == "goals":
            rel = self.goal - self.pos
            dist = np.linalg.norm(rel, axis=1)
            bearing = np.arctan2(rel[:, 1], rel[:, 0]) - self.heading
            return np.stack([dist / 10.0, np.cos(bearing), np.sin(bearing)], axis=1)
        if s.kind == "vtrack":
            return self.v_target[:, None].copy()
        idx = np.minimum(self.next_obstacle, self.N_OBSTACLES - 2)
        rows = np.arange(self.n)
        d1 = (self.obstacle_x[rows, idx] - self.pos[:, 0]) / 10.0
        d2 = (self.obstacle_x[rows, idx + 1] - self.pos[:, 0]) / 10.0
        return np.stack([d1, self.obstacle_h[rows, idx], d2, self.obstacle_h[rows, idx + 1]], axis=1)

    def step(self, action) -> tuple[EnvObservation, np.ndarray, np.ndarray]:
        s = self.spec
        prev_x = self.pos[:, 0].copy()
        self._advance(action)
        reward = np.zeros(self.n)
        invalid = self.fallen.copy()
        rows = np.arange(self.n)
        if s.kind == "goals":
            hit = np.linalg.norm(self.goal - self.pos, axis=1) <= s.goal_radius
            reward += hit
            if hit.any():
                self.goal[hit] = self._sample_goal(self.pos[hit], int(hit.sum()))
        elif s.kind == "vtrack":
            reward += np.abs(self.vel - self.v_target) <= s.speed_band
            switch = (self.t % s.speed_interval == 0) & (self.t < self.horizon)
            if switch.any():
                self.v_target[switch] = self._rng.choice(np.asarray(s.target_speeds), int(switch.sum()))
        else:
            idx = np.minimum(self.next_obstacle, self.N_OBSTACLES - 1)
            ox = self.obstacle_x[rows, idx]
            crossing = (prev_x < ox) & (self.pos[:, 0] >= ox)
            need = self.obstacle_h[rows, idx]
            if s.kind == "hurdles":
                ok = self.joints[:, 0] >= need
            elif s.kind == "limbos":
                ok = self.joints[:, 2] <= -need
            elif s.kind == "gaps":
                ok = self.vel >= s.gap_speed
            else:  # stairs-lite
                ok = self.joints[:, 1] >= need
            cleared = crossing & ok
            blocked = crossing & ~ok
            reward += cleared
            self.next_obstacle = self.next_obstacle + cleared
            if s.kind == "stairs-lite":
                # blocked by the step: pushed back in front of it, momentum lost
                self.pos[blocked, 0] = ox[blocked] - 1e-3
                self.vel[blocked] = 0.0
            else:
                invalid = invalid | blocked
        self.fallen = invalid
        reward = np.where(invalid, -1.0, reward)
        truncated = (self.t >= self.horizon) & ~invalid
        done = invalid | truncated
        self.score += reward
        return self._observe(truncated), reward, done


def make_env(kind: str | None, n: int = 1, horizon: int | None = None, body: BodyParams = BodyParams(),
             seed: int | None = 0, task: TaskSpec | None = None):
    """``kind=None`` (or "basic") builds the pre-training environment."""
    if kind in (None, "basic"):
        return Locomotor(n=n, horizon=horizon or 100, body=body, seed=seed)
    spec = task if task is not None else TaskSpec(kind=kind)
    if spec.kind != kind:
        spec = replace(spec, kind=kind)
    if horizon is not None:
        spec = replace(spec, horizon=horizon)
    return TaskEnv(spec, n=n, body=body, seed=seed)


def reset(env, seed=None) -> EnvObservation:
    return env.reset(seed)


def step(env, action):
    return env.step(action)


task_step = step
