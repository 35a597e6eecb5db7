"""Adam with coupled L2 weight decay (decay added to the gradient)."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    def __init__(self, params: dict[str, Tensor], lr=0.01, beta1=0.9, beta2=0.999,
                 eps=1e-8, weight_decay=1e-5):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.first_moment = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.second_moment = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        """One bias-corrected update. Validates all gradients before touching
        any parameter, so a NaN never leaves the model half-updated."""
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient; call backward first")
            if not np.isfinite(p.grad).all():
                raise FloatingPointError(f"non-finite gradient in parameter {name!r}")

        self.step_count += 1
        bias1 = 1.0 - self.beta1 ** self.step_count
        bias2 = 1.0 - self.beta2 ** self.step_count
        for name, p in self.params.items():
            grad = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            m = self.first_moment[name]
            v = self.second_moment[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            p.data = p.data - self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if not np.isfinite(p.data).all():
                raise FloatingPointError(f"non-finite values in parameter {name!r} after update")
