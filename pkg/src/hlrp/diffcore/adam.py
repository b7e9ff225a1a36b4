from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hlrp.diffcore.tape import ParamStore
from hlrp.errors import ShapeError


@dataclass
class Adam:
    """Adam with bias correction.  Moments are keyed by parameter name."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, store: ParamStore, grads: dict):
        trainable = store.trainable()
        if set(grads) != set(trainable):
            extra = sorted(set(grads) - set(trainable))
            missing = sorted(set(trainable) - set(grads))
            raise ShapeError(f"gradient set mismatch: extra={extra} missing={missing}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name in trainable:
            g = grads[name]
            p = store[name]
            if g.shape != p.shape:
                raise ShapeError(f"{name}: gradient shape {g.shape} != {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            store[name] = p - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
