"""Discrete skills, the trainable skill encoder, and the skill-diversity objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, take_rows

NORM_EPS = 1e-8
# largest float32 below 1: tanh rounds to exactly +-1 in float32 once |raw| > ~9
INSIDE = float(np.nextafter(np.float32(1.0), np.float32(0.0)))


def squash(raw: np.ndarray) -> np.ndarray:
    """tanh, kept strictly inside (-1, 1) after float32 rounding."""
    return np.clip(np.tanh(raw), -INSIDE, INSIDE).astype(np.asarray(raw).dtype)


class DegenerateEmbeddingError(ValueError):
    """An embedding row has (near) zero norm, so its normalized form is undefined."""


@dataclass(frozen=True)
class DiscreteSkill:
    z: int
    n_skills: int = 10

    def __post_init__(self):
        if not 0 <= self.z < self.n_skills:
            raise IndexError(f"skill {self.z} outside [0, {self.n_skills - 1}]")


@dataclass
class ContinuousSkill:
    raw: np.ndarray
    squashed: np.ndarray

    @property
    def dim(self) -> int:
        return self.raw.shape[-1]


class SkillEncoder:
    """One trainable embedding layer mapping a skill index to a latent mean.

    ``normalize`` picks the denominator of the unit embedding: ``"printed"`` divides
    tanh(mu) by ||mu||, ``"tanh"`` divides by ||tanh(mu)|| (a true unit vector).
    """

    def __init__(self, n_skills: int = 10, dim: int = 7, sigma_z: float = 0.3, init_std: float = 0.1,
                 rng: np.random.Generator | None = None, normalize: str = "printed"):
        if normalize not in ("printed", "tanh"):
            raise ValueError(f"normalize must be 'printed' or 'tanh', got {normalize!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_skills = n_skills
        self.dim = dim
        self.sigma_z = sigma_z
        self.normalize = normalize
        self.table = Tensor(rng.normal(0.0, init_std, (n_skills, dim)), requires_grad=True, name="table")

    def parameters(self) -> list[Tensor]:
        return [self.table]

    def named_parameters(self) -> dict[str, Tensor]:
        return {"table": self.table}

    def encode(self, z) -> Tensor:
        """Latent mean for skill(s) ``z`` (int or integer array)."""
        return take_rows(self.table, _index(z, self.n_skills))

    def sample(self, z, rng: np.random.Generator) -> ContinuousSkill:
        return sample_skill(self, z, rng)

    def unit(self, z) -> np.ndarray:
        return unit_embedding(self, z).data


def _index(z, n_skills: int):
    if isinstance(z, DiscreteSkill):
        z = z.z
    arr = np.asarray(z)
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError("skill indices must be integers")
    if arr.size and (arr.min() < 0 or arr.max() >= n_skills):
        raise IndexError(f"skill index outside [0, {n_skills - 1}]")
    return arr


def encode(enc: SkillEncoder, z) -> Tensor:
    return enc.encode(z)


def sample_skill(enc: SkillEncoder, z, rng: np.random.Generator) -> ContinuousSkill:
    """raw ~ N(mu_z, sigma_z^2 I), squashed = tanh(raw)."""
    if enc.sigma_z < 0:
        raise ValueError("sigma_z must be non-negative")
    mu = enc.encode(z).data
    raw = mu + enc.sigma_z * rng.standard_normal(mu.shape).astype(mu.dtype) if enc.sigma_z > 0 else mu.copy()
    return ContinuousSkill(raw=raw, squashed=squash(raw))


def sample_random_skill(dim: int, rng: np.random.Generator, n: int | None = None) -> ContinuousSkill:
    """A skill drawn uniformly from the open box (-1, 1)^dim (values never hit +-1)."""
    shape = (dim,) if n is None else (n, dim)
    squashed = rng.uniform(-1.0, 1.0, shape)
    squashed = np.clip(squashed, -1.0 + 1e-7, 1.0 - 1e-7).astype(np.float32)
    return ContinuousSkill(raw=np.arctanh(squashed), squashed=squashed)


def unit_embedding(enc: SkillEncoder, z=None) -> Tensor:
    """Normalized embedding(s); all rows when ``z`` is None."""
    mu = enc.table if z is None else enc.encode(z)
    sq = (mu * mu).sum(axis=-1, keepdims=True)
    if np.any(np.sqrt(sq.data) < NORM_EPS):
        raise DegenerateEmbeddingError("skill embedding with zero norm")
    t = mu.tanh()
    if enc.normalize == "tanh":
        denom = (t * t).sum(axis=-1, keepdims=True).sqrt()
    else:
        denom = sq.sqrt()
    return t / denom


def sd_loss(enc: SkillEncoder) -> Tensor:
    """Negative sum of pairwise L2 distances between normalized embeddings."""
    units = unit_embedding(enc)
    c = enc.n_skills
    if c < 2:
        return (units * 0.0).sum()
    rows, cols = np.triu_indices(c, k=1)
    diff = units[rows] - units[cols]
    dist = ((diff * diff).sum(axis=-1) + 1e-12).sqrt()
    return -dist.sum()


def min_pairwise_distance(units: np.ndarray) -> float:
    c = units.shape[0]
    if c < 2:
        return 0.0
    rows, cols = np.triu_indices(c, k=1)
    return float(np.linalg.norm(units[rows] - units[cols], axis=-1).min())
