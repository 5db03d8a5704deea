"""Multilayer perceptrons, Adam, and a central-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .tensor import Tensor, precision

ACTIVATIONS = ("tanh", "relu", "linear")


def _activate(x: Tensor, tag: str) -> Tensor:
    if tag == "relu":
        return x.relu()
    if tag == "tanh":
        return x.tanh()
    return x


class Mlp:
    """Fully connected network; ``layers`` holds ``(weight, bias, activation)`` triples."""

    def __init__(
        self,
        sizes: list[int],
        rng: np.random.Generator,
        activation: str = "relu",
        out_activation: str = "linear",
        name: str = "mlp",
    ):
        if len(sizes) < 2:
            raise ValueError("an Mlp needs at least input and output sizes")
        for tag in (activation, out_activation):
            if tag not in ACTIVATIONS:
                raise ValueError(f"unknown activation {tag!r}")
        self.name = name
        self.layers: list[tuple[Tensor, Tensor, str]] = []
        for li, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(n_in)
            w = Tensor(rng.uniform(-bound, bound, (n_in, n_out)), requires_grad=True, name=f"w{li}")
            b = Tensor(rng.uniform(-bound, bound, (n_out,)), requires_grad=True, name=f"b{li}")
            tag = out_activation if li == len(sizes) - 2 else activation
            self.layers.append((w, b, tag))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return forward(self, x)

    def parameters(self) -> list[Tensor]:
        return [p for w, b, _ in self.layers for p in (w, b)]

    def named_parameters(self) -> dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}


def forward(mlp: Mlp, x: Tensor) -> Tensor:
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.shape[-1] != mlp.input_dim:
        raise ValueError(f"{mlp.name}: expected last dim {mlp.input_dim}, got {x.shape[-1]}")
    for w, b, tag in mlp.layers:
        x = _activate(x @ w + b, tag)
    return x


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.data)


def copy_values(dst: Iterable[Tensor], src: Iterable[Tensor]) -> None:
    for d, s in zip(dst, src, strict=True):
        d.data = s.data.copy()


@dataclass
class AdamState:
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


class Adam:
    """Adam with bias correction. Parameters without a grad buffer are a contract error."""

    def __init__(self, params: Iterable[Tensor], lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr, betas[0], betas[1], eps)
        self.state.m = [np.zeros_like(p.data) for p in self.params]
        self.state.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        zero_grad(self.params)

    def step(self) -> None:
        adam_step(self.state, self.params)


def adam_step(state: AdamState, params: list[Tensor]) -> None:
    for p in params:
        if p.grad is None:
            raise ValueError(f"parameter {p.name or '?'} has no gradient; call backward() first")
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient for parameter {p.name or '?'}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        upd = (state.learning_rate / c1) * m / (np.sqrt(v / c2) + state.epsilon)
        p.data = (p.data - upd).astype(p.data.dtype, copy=False)


def finite_diff_check(model, loss_fn: Callable[[], Tensor], epsilon: float = 1e-4, max_coords: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Max over parameter entries of |analytic - central difference| / max(1, |analytic|).

    ``model`` is anything exposing ``parameters()``; ``loss_fn`` rebuilds the scalar loss
    from scratch on each call. Both sides are evaluated in float64 so the comparison
    tests the derivative rules rather than float32 rounding. ``max_coords`` limits the
    check to a random subset of entries per parameter tensor.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = model.parameters() if hasattr(model, "parameters") else list(model)
    saved = [p.data for p in params]
    saved_grads = [p.grad for p in params]
    worst = 0.0
    try:
        with precision(np.float64):
            for p in params:
                p.data = p.data.astype(np.float64)
                p.grad = None
            loss = loss_fn()
            loss.backward()
            analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
            for p, ga in zip(params, analytic):
                flat = p.data.reshape(-1)
                coords = np.arange(flat.size)
                if max_coords is not None and flat.size > max_coords:
                    coords = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
                for c in coords:
                    orig = flat[c]
                    flat[c] = orig + epsilon
                    up = loss_fn().item()
                    flat[c] = orig - epsilon
                    down = loss_fn().item()
                    flat[c] = orig
                    numeric = (up - down) / (2.0 * epsilon)
                    a = ga.reshape(-1)[c]
                    worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    finally:
        for p, d, g in zip(params, saved, saved_grads):
            p.data = d
            p.grad = g
    return float(worst)
