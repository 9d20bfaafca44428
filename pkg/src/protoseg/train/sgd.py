"""SGD with momentum and weight decay.

Update rule: v <- momentum * v + grad + weight_decay * param;
param <- param - lr * v. One scalar step from p=1, g=2, lr=0.1, m=0.9,
wd=0 therefore lands on p' = 0.8.
"""

from __future__ import annotations

import torch


def sgd_step(param, grad, velocity, lr: float, momentum: float, weight_decay: float):
    """One functional update; returns (param', velocity'). Works on numpy
    arrays, torch tensors and plain floats alike."""
    v = momentum * velocity + grad + weight_decay * param
    return param - lr * v, v


class SGD:
    """Stateful updater over a model's parameters."""

    def __init__(self, params, lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
        if lr < 0:
            raise ValueError(f"lr must be >= 0, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [torch.zeros_like(p) for p in self.params]

    @torch.no_grad()
    def step(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            new_p, new_v = sgd_step(
                p, p.grad, self.velocity[i], self.lr, self.momentum, self.weight_decay
            )
            self.velocity[i] = new_v
            p.copy_(new_p)

    def zero_grad(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.grad.detach_()
                p.grad.zero_()
