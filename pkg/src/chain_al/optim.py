"""Minimal first-order optimizers used by the trainer and the outer loop.

Each optimizer is stateful and works on whatever shape the first
gradient has (the weight matrix for training, a scalar for the penalty
coefficient).
"""

import numpy as np


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = None
        self._v = None
        self._t = 0

    def step(self, x, g):
        g = np.asarray(g, dtype=np.float64)
        if self._m is None:
            self._m = np.zeros_like(g)
            self._v = np.zeros_like(g)
        self._t += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * g
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * g * g
        m_hat = self._m / (1.0 - self.beta1 ** self._t)
        v_hat = self._v / (1.0 - self.beta2 ** self._t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    """Plain gradient step, optionally with heavy-ball momentum."""

    def __init__(self, lr, momentum=0.0):
        self.lr = lr
        self.momentum = momentum
        self._vel = None

    def step(self, x, g):
        g = np.asarray(g, dtype=np.float64)
        if self.momentum == 0.0:
            return x - self.lr * g
        if self._vel is None:
            self._vel = np.zeros_like(g)
        self._vel = self.momentum * self._vel + g
        return x - self.lr * self._vel
