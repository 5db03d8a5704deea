"""Variational skill discriminator q(z | phi(s)) and the mutual-information reward."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .nn import Adam, Mlp
from .tensor import Tensor, log_softmax, no_grad

PROB_FLOOR = 1e-8
LOG_FLOOR = float(np.log(PROB_FLOOR))


def identity_features(states: np.ndarray) -> np.ndarray:
    return states


class Discriminator:
    def __init__(self, feature_dim: int, n_skills: int, rng: np.random.Generator, hidden=(256, 256),
                 feature_map: Callable[[np.ndarray], np.ndarray] = identity_features, lr: float = 3e-4):
        self.n_skills = n_skills
        self.feature_map = feature_map
        self.net = Mlp([feature_dim, *hidden, n_skills], rng, activation="relu", name="discriminator")
        self.opt = Adam(self.net.parameters(), lr=lr)

    def parameters(self):
        return self.net.parameters()

    def named_parameters(self):
        return self.net.named_parameters()

    def log_probs(self, states) -> Tensor:
        """Floored log q(. | s) for a batch of raw states."""
        feats = self.feature_map(np.asarray(states))
        logp = log_softmax(self.net(Tensor(feats)))
        return logp.clamp(LOG_FLOOR, None)

    def predict(self, states) -> np.ndarray:
        with no_grad():
            logits = self.net(Tensor(self.feature_map(np.asarray(states)))).data
        shifted = logits - logits.max(axis=-1, keepdims=True)
        p = np.exp(shifted)
        p /= p.sum(axis=-1, keepdims=True)
        return np.maximum(p, PROB_FLOOR)

    def update(self, states, z) -> float:
        self.opt.zero_grad()
        loss = ce_loss(self, states, z)
        loss.backward()
        self.opt.step()
        return loss.item()


def predict(disc: Discriminator, states) -> np.ndarray:
    return disc.predict(states)


def ce_loss(disc: Discriminator, states, z) -> Tensor:
    """Mean one-hot cross-entropy of the true skill labels."""
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    if z.size == 0:
        raise ValueError("ce_loss needs a non-empty batch")
    logp = disc.log_probs(states)
    onehot = np.zeros(logp.shape, dtype=logp.data.dtype)
    onehot[np.arange(z.size), z] = 1.0
    return -(logp * onehot).sum() * (1.0 / z.size)


def ce_from_probs(probs: np.ndarray, z) -> float:
    """Cross-entropy evaluated directly from probability rows (floored)."""
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    p = np.maximum(np.asarray(probs, dtype=np.float64)[np.arange(z.size), z], PROB_FLOOR)
    return float(-np.log(p).mean())


def mi_reward_from_probs(probs: np.ndarray, z, n_skills: int) -> np.ndarray:
    """ln C + ln q(z | s) with the uniform skill prior; q is floored at 1e-8."""
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    q = np.asarray(probs, dtype=np.float64).reshape(z.size, -1)[np.arange(z.size), z]
    return np.log(n_skills) + np.log(np.clip(q, PROB_FLOOR, 1.0))


def intrinsic_reward(disc: Discriminator, next_states, z) -> np.ndarray:
    """Mutual-information reward from the state reached after acting."""
    return mi_reward_from_probs(disc.predict(next_states), z, disc.n_skills)
