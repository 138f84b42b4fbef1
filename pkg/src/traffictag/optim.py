"""Parameter store, initialization, and in-place optimizers."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor


class ParamStore:
    """Named trainable tensors plus Adam moment state.

    Weight matrices are initialized uniform(-sqrt(1/fan_in), +sqrt(1/fan_in))
    with fan_in the first dimension, biases to zero, and embeddings to
    0.1 * standard normal draws.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.params: dict[str, Tensor] = {}
        self.adam_m: dict[str, np.ndarray] = {}
        self.adam_v: dict[str, np.ndarray] = {}
        self.adam_t = 0

    def add(self, name: str, shape: tuple[int, ...], init: str = "uniform") -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if init == "uniform":
            bound = math.sqrt(1.0 / shape[0])
            data = self.rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "embedding":
            data = self.rng.standard_normal(shape) * 0.1
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(data)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def tensors(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, data in snap.items():
            self.params[name].data[...] = data


def clip_global_norm(store: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for t in store.params.values():
        if t.grad is not None:
            total += float((t.grad * t.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for t in store.params.values():
            if t.grad is not None:
                t.grad *= scale
    return norm


def sgd_step(store: ParamStore, lr: float) -> None:
    for t in store.params.values():
        if t.grad is not None:
            t.data -= lr * t.grad


def adam_step(
    store: ParamStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Adam with bias correction; missing gradients count as zero."""
    store.adam_t += 1
    t = store.adam_t
    for name, p in store.params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = store.adam_m.setdefault(name, np.zeros_like(p.data))
        v = store.adam_v.setdefault(name, np.zeros_like(p.data))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
