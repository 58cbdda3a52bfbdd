"""First-order optimizers and the linear warmup/decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Tensor


class OptimizerError(RuntimeError):
    """A parameter update could not be applied (typically a non-finite gradient)."""


class ScheduleError(ValueError):
    """A learning-rate schedule was queried outside its valid step range."""


def _check_grad(p: Tensor, index: int) -> np.ndarray:
    g = p.grad
    if g is None:
        g = np.zeros_like(p.data)
    if not np.all(np.isfinite(g)):
        name = p.name or f"param[{index}]"
        raise OptimizerError(f"non-finite gradient for {name}")
    return g


class AdamW:
    """Adam with decoupled weight decay.

    The decay term is applied directly to the parameter and never enters
    the moment estimates. Conventional defaults: beta1=0.9, beta2=0.999,
    eps=1e-8, weight_decay=0.01.
    """

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = _check_grad(p, i)
            m = self.m[i]
            v = self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / bc1
            vhat = v / bc2
            p.data -= lr * (mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * p.data)


class SgdMomentum:
    """Classical momentum: v <- mu*v + g; theta <- theta - lr*v."""

    def __init__(self, params, momentum: float = 0.9):
        self.params = list(params)
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        for i, p in enumerate(self.params):
            g = _check_grad(p, i)
            v = self.velocity[i]
            v *= self.momentum
            v += g
            p.data -= lr * v


@dataclass(frozen=True)
class WarmupSchedule:
    """Linear ramp from 0 to base_lr over warmup_steps, then linear decay to 0."""

    base_lr: float
    warmup_steps: int
    total_steps: int

    def __post_init__(self):
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ScheduleError(
                f"need 0 < warmup_steps <= total_steps, got {self.warmup_steps}/{self.total_steps}"
            )

    def lr(self, t: int) -> float:
        if not 0 <= t <= self.total_steps:
            raise ScheduleError(f"step {t} outside [0, {self.total_steps}]")
        if t <= self.warmup_steps:
            return self.base_lr * (t / self.warmup_steps)
        return self.base_lr * ((self.total_steps - t) / (self.total_steps - self.warmup_steps))


def warmup_lr(schedule: WarmupSchedule, t: int) -> float:
    return schedule.lr(t)


@dataclass(frozen=True)
class ConstantSchedule:
    """Fixed learning rate for loops that do not warm up."""

    base_lr: float

    def lr(self, t: int) -> float:
        return self.base_lr
