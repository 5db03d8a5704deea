"""Run configuration: nested dataclasses mirrored to a YAML file with dotted sections.

Defaults reproduce the published pre-training and task-training tables. Desk-scale
budgets live in ``configs/desk.yaml``.
"""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending dotted key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class NetConfig:
    hidden: int = 256
    layers: int = 2

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.hidden,) * self.layers


@dataclass
class SkillConfig:
    n_skills: int = 10          # C
    latent_dim: int = 7         # d
    sigma_z: float = 0.3
    lr: float = 1e-5            # encoder learning rate
    init_std: float = 0.1
    normalize: str = "printed"  # "printed": tanh(mu)/||mu||, "tanh": tanh(mu)/||tanh(mu)||


@dataclass
class BgConfig:
    preset: str = "normal"
    b_glu: float = 1.0


@dataclass
class DiscConfig:
    lr: float = 3e-4
    feature_map: str = "identity"   # "identity" or "joints"


@dataclass
class EnvConfig:
    robot: str = "walker"
    w_v: float = 1.0
    w_c: float = 0.1
    w_f: float = 0.0
    n_joints: int = 3
    joint_gain: float = 0.5
    drag: float = 0.2
    thrust: list = field(default_factory=lambda: [0.5, 0.3, 0.2])
    turn: list = field(default_factory=lambda: [0.0, 0.5, -0.5])
    tilt: list = field(default_factory=lambda: [0.3, -0.3, 0.3])
    turn_scale: float = 0.1
    tilt_rate: float = 0.1
    fall_tilt: float = 0.6


@dataclass
class PretrainConfig:
    total_samples: int = 20_000_000
    warmup_samples: int = 10_000
    batch_size: int = 256
    buffer_size: int = 3_000_000
    horizon: int = 100
    n_envs: int = 10
    samples_per_update: int = 500
    updates: int = 50                 # n
    beta: float = 0.5
    lr_pi: float = 3e-4
    lr_q: float = 3e-4
    lr_alpha: float = 1e-4
    alpha_init: float = 0.1
    target_entropy: float | None = None   # None -> -dim(A)
    gamma: float = 0.99
    tau: float = 0.01
    twin: bool = True
    eval_interval: int = 50_000
    eval_episodes: int = 10
    dump_buffer: bool = False


@dataclass
class TaskTrainConfig:
    total_samples: int = 10_000_000
    warmup_samples: int = 1000
    batch_size: int = 256
    buffer_size: int = 1_000_000
    horizon: int = 1000
    n_envs: int = 10
    samples_per_update: int = 500
    updates: int = 50
    lr_pi: float = 3e-4
    lr_q: float = 3e-4
    lr_alpha: float = 1e-4
    alpha_init: float = 0.1
    target_entropy: float | None = None   # None -> -d
    gamma: float = 0.99
    tau: float = 0.005
    twin: bool = True
    eval_interval: int = 50_000
    eval_episodes: int = 50


@dataclass
class HrlSection:
    k: int = 3
    value_samples: int = 1


@dataclass
class TaskConfig:
    kind: str = "goals"
    spacing: float = 12.0
    spacing_jitter: float = 3.0
    first_obstacle: float = 8.0
    height_range: list = field(default_factory=lambda: [0.3, 0.6])
    gap_speed: float = 0.5
    goal_radius: float = 1.0
    goal_distance: list = field(default_factory=lambda: [3.0, 8.0])
    target_speeds: list = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    speed_band: float = 0.1
    speed_interval: int = 250


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/default"
    deterministic: bool = False
    dump_traj: bool = False
    net: NetConfig = field(default_factory=NetConfig)
    skill: SkillConfig = field(default_factory=SkillConfig)
    bg: BgConfig = field(default_factory=BgConfig)
    disc: DiscConfig = field(default_factory=DiscConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    tasktrain: TaskTrainConfig = field(default_factory=TaskTrainConfig)
    hrl: HrlSection = field(default_factory=HrlSection)
    task: TaskConfig = field(default_factory=TaskConfig)

    # -- derived objects --------------------------------------------------------
    def body(self):
        from .envs import BodyParams

        e = self.env
        return BodyParams(n_joints=e.n_joints, joint_gain=e.joint_gain, drag=e.drag, thrust=tuple(e.thrust),
                          turn=tuple(e.turn), tilt=tuple(e.tilt), turn_scale=e.turn_scale,
                          tilt_rate=e.tilt_rate, fall_tilt=e.fall_tilt)

    def weights(self):
        from .envs import MotorRewardWeights

        return MotorRewardWeights(self.env.w_v, self.env.w_c, self.env.w_f)

    def activity(self):
        from .basal_ganglia import ActivityConfig, PRESETS

        if self.bg.preset == "custom":
            return ActivityConfig(b_glu=self.bg.b_glu, n_skills=self.skill.n_skills, preset="custom")
        return ActivityConfig(b_glu=PRESETS[self.bg.preset], n_skills=self.skill.n_skills, preset=self.bg.preset)

    def task_spec(self, horizon: int | None = None):
        from .envs import TaskSpec

        t = self.task
        return TaskSpec(kind=t.kind, horizon=horizon or self.tasktrain.horizon, spacing=t.spacing,
                        spacing_jitter=t.spacing_jitter, first_obstacle=t.first_obstacle,
                        height_range=tuple(t.height_range), gap_speed=t.gap_speed, goal_radius=t.goal_radius,
                        goal_distance=tuple(t.goal_distance), target_speeds=tuple(t.target_speeds),
                        speed_band=t.speed_band, speed_interval=t.speed_interval)

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in data.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(dotted, "unknown key")
        sub = _SECTIONS.get(key) if not prefix else None
        kwargs[key] = _build(sub, val, dotted) if sub is not None else val
    return cls(**kwargs)


_SECTIONS = {
    "net": NetConfig, "skill": SkillConfig, "bg": BgConfig, "disc": DiscConfig, "env": EnvConfig,
    "pretrain": PretrainConfig, "tasktrain": TaskTrainConfig, "hrl": HrlSection, "task": TaskConfig,
}


def from_dict(data: dict | None) -> RunConfig:
    cfg = _build(RunConfig, data or {}, "")
    validate(cfg)
    return cfg


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError("--config", f"file not found: {p}")
        data = yaml.safe_load(p.read_text()) or {}
    for ov in overrides or []:
        apply_override(data, ov)
    return from_dict(data)


def apply_override(data: dict, override: str) -> None:
    if "=" not in override:
        raise ConfigError(override, "override must look like section.key=value")
    key, raw = override.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "not a section")
    node[parts[-1]] = yaml.safe_load(raw)


_INT_KEYS = {"total_samples", "warmup_samples", "batch_size", "buffer_size", "horizon", "n_envs",
             "samples_per_update", "updates", "eval_interval", "eval_episodes", "hidden", "layers",
             "n_skills", "latent_dim", "k", "n_joints", "value_samples", "speed_interval"}


def validate(cfg: RunConfig) -> None:
    from .basal_ganglia import PRESETS
    from .envs import TASK_KINDS

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(key, msg)

    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, str) and f.type in ("int", "float"):
                # YAML 1.1 reads "3e5" as a string
                with contextlib.suppress(ValueError):
                    v = float(v)
                    setattr(obj, f.name, v)
            if f.name in _INT_KEYS:
                if isinstance(v, float) and v.is_integer():
                    setattr(obj, f.name, int(v))
                    v = int(v)
                need(isinstance(v, int) and not isinstance(v, bool), f"{sec}.{f.name}", "must be an integer")
    need(isinstance(cfg.seed, int), "seed", "must be an integer")
    need(cfg.net.hidden >= 1 and cfg.net.layers >= 1, "net.hidden", "network sizes must be positive")
    need(cfg.skill.n_skills >= 1, "skill.n_skills", "need at least one skill")
    need(cfg.skill.latent_dim >= 1, "skill.latent_dim", "must be >= 1")
    need(cfg.skill.sigma_z >= 0, "skill.sigma_z", "must be >= 0")
    need(cfg.skill.normalize in ("printed", "tanh"), "skill.normalize", "must be 'printed' or 'tanh'")
    need(cfg.bg.preset in (*PRESETS, "custom"), "bg.preset", f"unknown preset {cfg.bg.preset!r}")
    need(cfg.bg.b_glu >= 0, "bg.b_glu", "must be >= 0")
    need(cfg.disc.feature_map in ("identity", "joints"), "disc.feature_map", "must be 'identity' or 'joints'")
    need(len(cfg.env.thrust) == cfg.env.n_joints, "env.thrust", "needs n_joints entries")
    need(len(cfg.env.turn) == cfg.env.n_joints, "env.turn", "needs n_joints entries")
    need(len(cfg.env.tilt) == cfg.env.n_joints, "env.tilt", "needs n_joints entries")
    for sec in ("pretrain", "tasktrain"):
        s = getattr(cfg, sec)
        need(s.total_samples >= 0, f"{sec}.total_samples", "must be >= 0")
        need(s.warmup_samples >= 0, f"{sec}.warmup_samples", "must be >= 0")
        need(s.batch_size >= 2, f"{sec}.batch_size", "must be >= 2")
        need(s.buffer_size >= s.batch_size, f"{sec}.buffer_size", "must hold at least one batch")
        need(s.horizon >= 1, f"{sec}.horizon", "must be >= 1")
        need(s.n_envs >= 1, f"{sec}.n_envs", "must be >= 1")
        need(s.samples_per_update >= s.n_envs and s.samples_per_update % s.n_envs == 0,
             f"{sec}.samples_per_update", "must be a positive multiple of n_envs")
        need(s.updates >= 0, f"{sec}.updates", "must be >= 0")
        need(0.0 <= s.gamma <= 1.0, f"{sec}.gamma", "must lie in [0, 1]")
        need(0.0 <= s.tau <= 1.0, f"{sec}.tau", "must lie in [0, 1]")
        need(s.alpha_init > 0, f"{sec}.alpha_init", "must be > 0")
        need(s.eval_interval >= 0 and s.eval_episodes >= 1, f"{sec}.eval_interval", "invalid evaluation cadence")
    need(0.0 <= cfg.pretrain.beta <= 1.0, "pretrain.beta", "must lie in [0, 1]")
    need(cfg.hrl.k >= 1, "hrl.k", "must be >= 1")
    need(cfg.hrl.value_samples >= 1, "hrl.value_samples", "must be >= 1")
    need(cfg.task.kind in TASK_KINDS, "task.kind", f"must be one of {TASK_KINDS}")
