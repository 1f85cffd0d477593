"""Adam and step-decayed SGD over dicts of parameter arrays."""

from __future__ import annotations

import numpy as np


def _check_shapes(params, other, what):
    for name, p in params.items():
        if name not in other or other[name].shape != p.shape:
            raise ValueError(f"{what} shape mismatch for {name!r}")


class Adam:
    """Bias-corrected Adam; defaults follow the classifier training recipe
    (lr 1e-4, beta1 = beta2 = 0.9, eps 1e-6)."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.9, eps=1e-6):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        _check_shapes(params, grads, "gradient")
        _check_shapes(params, self.m, "moment")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in params.items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            m_hat = self.m[name] / (1.0 - b1 ** self.t)
            v_hat = self.v[name] / (1.0 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    """Plain SGD with the captioner's schedule: lr0 * decay^(epoch // every)."""

    def __init__(self, lr0=1e-3, decay=0.999, decay_every=10):
        self.lr0 = lr0
        self.decay = decay
        self.decay_every = decay_every

    def lr(self, epoch):
        if epoch < 0:
            raise ValueError(f"negative epoch {epoch}")
        return self.lr0 * self.decay ** (epoch // self.decay_every)

    def step(self, params, grads, epoch):
        _check_shapes(params, grads, "gradient")
        lr = self.lr(epoch)
        for name, p in params.items():
            p -= lr * grads[name]
