"""Optimizer and learning-rate schedule.

AdamW here is the decoupled-decay variant: the weight-decay term scales
the parameter directly and is kept out of the moment estimates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NonFiniteError
from . import kernels as K
from .layers import Parameter


@dataclass(frozen=True)
class LrSchedule:
    """Triangular cyclic schedule: linear climb from lr_min to lr_max over
    the first half cycle, linear descent back over the second, repeating."""

    lr_min: float = 1e-6
    lr_max: float = 1e-4
    cycle_steps: int = 13000

    def __post_init__(self):
        if not self.lr_min < self.lr_max:
            raise ConfigError(
                f"lr_min must be < lr_max, got {self.lr_min} >= {self.lr_max}")
        if self.cycle_steps <= 0 or self.cycle_steps % 2 != 0:
            raise ConfigError(
                f"cycle_steps must be a positive even integer, got {self.cycle_steps}")


def cyclic_lr(step: int, schedule: LrSchedule) -> float:
    """Learning rate at a 0-based global step."""
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    half = schedule.cycle_steps // 2
    phase = step % schedule.cycle_steps
    span = schedule.lr_max - schedule.lr_min
    if phase <= half:
        return schedule.lr_min + span * (phase / half)
    return schedule.lr_max - span * ((phase - half) / half)


class AdamW:
    """Tracks first/second moment estimates per parameter and applies
    bias-corrected updates in place. A step with any non-finite gradient
    is rejected before touching any state."""

    def __init__(self, params: list[Parameter], weight_decay: float = 1e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not params:
            raise ValueError("optimizer needs at least one parameter")
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        self.params = list(params)
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {p.name: np.zeros_like(p.values) for p in self.params}
        self._v = {p.name: np.zeros_like(p.values) for p in self.params}

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        for p in self.params:
            if not np.isfinite(p.grad).all():
                raise NonFiniteError(
                    f"non-finite gradient in {p.name}; step rejected")
        self.step_count += 1
        for p in self.params:
            K.adamw_update(
                p.values.reshape(-1), p.grad.reshape(-1),
                self._m[p.name].reshape(-1), self._v[p.name].reshape(-1),
                self.step_count, lr, self.beta1, self.beta2, self.eps,
                self.weight_decay)

    def state_dict(self) -> dict:
        return {
            "step_count": self.step_count,
            "m": {k: v.copy() for k, v in self._m.items()},
            "v": {k: v.copy() for k, v in self._v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        expected = set(self._m)
        for field in ("m", "v"):
            got = set(state[field])
            if got != expected:
                raise ConfigError(
                    f"optimizer state {field} keys do not match parameters: "
                    f"missing {sorted(expected - got)}, extra {sorted(got - expected)}")
        self.step_count = int(state["step_count"])
        for name in expected:
            if state["m"][name].shape != self._m[name].shape:
                raise ConfigError(f"optimizer state shape mismatch for {name}")
            self._m[name][...] = state["m"][name]
            self._v[name][...] = state["v"][name]
