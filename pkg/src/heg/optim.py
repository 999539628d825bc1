"""First-order optimizers over Tensor leaves.

State is keyed by tensor identity (references are pinned so ids stay
valid) and can be exported/loaded as plain array dicts for checkpointing.
Weight decay is added to the gradient as ``wd * param`` before the update.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .tensor import Tensor


class Optimizer:
    def __init__(self, lr: float, weight_decay: float = 0.0):
        if lr <= 0:
            raise ValueError("lr must be positive")
        if weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self._state: dict[int, dict] = {}
        self._pins: dict[int, Tensor] = {}

    def _grad(self, p: Tensor) -> np.ndarray:
        g = np.zeros_like(p.data) if p.grad is None else p.grad
        if self.weight_decay:
            g = g + self.weight_decay * p.data
        return g

    def _slot(self, p: Tensor) -> dict:
        key = id(p)
        if key not in self._state:
            self._state[key] = self._init_slot(p)
            self._pins[key] = p
        return self._state[key]

    def _init_slot(self, p: Tensor) -> dict:
        raise NotImplementedError

    def step(self, params: Sequence[Tensor]) -> None:
        for p in params:
            self._update(p, self._grad(p), self._slot(p))

    def _update(self, p: Tensor, g: np.ndarray, slot: dict) -> None:
        raise NotImplementedError

    @staticmethod
    def zero_grad(params: Iterable[Tensor]) -> None:
        for p in params:
            p.grad = None

    # -- checkpoint support ------------------------------------------------
    def export_slot(self, p: Tensor) -> dict:
        """Copy of the state slot for p (empty dict if p was never stepped)."""
        slot = self._state.get(id(p), {})
        return {k: (v.copy() if isinstance(v, np.ndarray) else v)
                for k, v in slot.items()}

    def load_slot(self, p: Tensor, slot: dict) -> None:
        restored = {k: (np.asarray(v, dtype=np.float64) if isinstance(v, (np.ndarray, list)) else v)
                    for k, v in slot.items()}
        self._state[id(p)] = restored
        self._pins[id(p)] = p


class Adam(Optimizer):
    def __init__(self, lr: float, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr, weight_decay)
        self.beta1, self.beta2, self.eps = float(beta1), float(beta2), float(eps)

    def _init_slot(self, p: Tensor) -> dict:
        return {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data), "t": 0}

    def _update(self, p: Tensor, g: np.ndarray, slot: dict) -> None:
        slot["t"] = int(slot["t"]) + 1
        t = slot["t"]
        slot["m"] = self.beta1 * slot["m"] + (1.0 - self.beta1) * g
        slot["v"] = self.beta2 * slot["v"] + (1.0 - self.beta2) * g * g
        m_hat = slot["m"] / (1.0 - self.beta1 ** t)
        v_hat = slot["v"] / (1.0 - self.beta2 ** t)
        p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Adagrad(Optimizer):
    def __init__(self, lr: float, weight_decay: float = 0.0, eps: float = 1e-10):
        super().__init__(lr, weight_decay)
        self.eps = float(eps)

    def _init_slot(self, p: Tensor) -> dict:
        return {"acc": np.zeros_like(p.data)}

    def _update(self, p: Tensor, g: np.ndarray, slot: dict) -> None:
        slot["acc"] = slot["acc"] + g * g
        p.data -= self.lr * g / (np.sqrt(slot["acc"]) + self.eps)


def make_optimizer(name: str, lr: float, weight_decay: float = 0.0) -> Optimizer:
    name = name.lower()
    if name == "adam":
        return Adam(lr, weight_decay)
    if name == "adagrad":
        return Adagrad(lr, weight_decay)
    raise ValueError(f"unknown optimizer '{name}' (expected adam or adagrad)")
