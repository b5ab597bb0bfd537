"""Adam with bias correction and per-group learning rates.

Parameter names carry their group as the prefix before the first dot
("ext", "cae", "clf"); each group gets its own learning rate. Frozen
parameters never reach the optimizer.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInput


class AdamState:
    def __init__(self, group_lrs: dict[str, float],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.group_lrs = dict(group_lrs)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def lr_for(self, name: str) -> float:
        group = name.split(".", 1)[0]
        if group not in self.group_lrs:
            raise InvalidInput(f"no learning rate configured for group {group!r}")
        return self.group_lrs[group]

    def apply(self, items) -> None:
        """One Adam step over (name, param, grad) triples, updating in place."""
        self.step += 1
        bc1 = 1.0 - self.beta1 ** self.step
        bc2 = 1.0 - self.beta2 ** self.step
        for name, param, grad in items:
            if grad is None:
                raise InvalidInput(f"parameter {name!r} has no gradient")
            grad = grad.astype(np.float32, copy=False)
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * (grad * grad)
            denom = np.sqrt(v / np.float32(bc2)) + np.float32(self.eps)
            param -= np.float32(self.lr_for(name)) * (m / np.float32(bc1)) / denom
