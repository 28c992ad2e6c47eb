"""Adam and a plateau learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DivergenceError(ArithmeticError):
    """Raised when training produces non-finite losses or gradients."""


@dataclass
class Adam:
    """Bias-corrected Adam updating a list of arrays in place."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
        for p, g in zip(params, grads):
            if np.shape(p) != np.shape(g):
                raise ValueError(f"gradient shape {np.shape(g)} does not match {np.shape(p)}")
            if not np.all(np.isfinite(g)):
                raise DivergenceError("non-finite gradient")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p[...] = p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
                "t": self.t, "m": [a.tolist() for a in self.m], "v": [a.tolist() for a in self.v]}


adam_step = Adam.step


@dataclass
class PlateauSchedule:
    """Multiply ``lr`` by ``decay`` after ``patience`` epochs without a new
    best loss; signal a stop once ``lr`` drops below ``floor``.

    :meth:`step` takes the whole loss history and consumes only the entries
    it has not seen yet, so it can be called once per epoch or once with a
    long history.
    """

    lr: float = 1e-3
    decay: float = 0.5
    floor: float = 1e-7
    patience: int = 5
    best: float = np.inf
    stale: int = 0
    seen: int = 0

    def __post_init__(self):
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f"decay must lie in (0, 1), got {self.decay}")
        if self.floor <= 0:
            raise ValueError(f"floor must be positive, got {self.floor}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")

    def step(self, history) -> tuple[float, bool]:
        if len(history) == 0:
            raise ValueError("loss history is empty")
        for loss in history[self.seen:]:
            if loss < self.best:
                self.best = loss
                self.stale = 0
            else:
                self.stale += 1
                if self.stale >= self.patience:
                    self.lr *= self.decay
                    self.stale = 0
        self.seen = len(history)
        return self.lr, self.lr < self.floor


def schedule_step(sched: PlateauSchedule, history) -> tuple[float, bool]:
    return sched.step(history)
