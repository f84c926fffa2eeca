"""Adam-style moment-tracked gradient updates.

theta_t = theta_{t-1} - alpha * m_hat / (sqrt(v_hat) + eps)

with bias-corrected first/second moments m_hat, v_hat. The same update
drives both network training and the culture-vector calibration; only the
learning rate differs.
"""

import numpy as np


class AdamState:
    def __init__(self, alpha: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> float:
        """Update params in place; returns the L2 norm of the applied update."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        sq = 0.0
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            upd = self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)
            params[k] -= upd
            sq += float(np.sum(upd * upd))
        return np.sqrt(sq)
