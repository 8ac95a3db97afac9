"""Probability parametrizations theta = theta(r) with inverse and score maps.

Four kinds are supported: sigmoid, direct (clamped), cosine and escort.  The
escort map takes two underlying parameters per coordinate, so its parameter
vectors have shape (d, 2) instead of (d,).  Score functions return the zero
vector on coordinates where theta(r) lands exactly on 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMOID = "sigmoid"
DIRECT = "direct"
COSINE = "cosine"
ESCORT = "escort"
KINDS = (SIGMOID, DIRECT, COSINE, ESCORT)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class Parametrization:
    kind: str
    escort_power: float = 4.0
    direct_clamp: float = 1e-6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown parametrization {self.kind!r}, expected one of {KINDS}")

    def theta(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if self.kind == SIGMOID:
            return sigmoid(r)
        if self.kind == DIRECT:
            return np.clip(r, self.direct_clamp, 1.0 - self.direct_clamp)
        if self.kind == COSINE:
            return 0.5 * (1.0 - np.cos(r))
        a = np.abs(r[..., 0]) ** self.escort_power
        b = np.abs(r[..., 1]) ** self.escort_power
        denom = a + b
        with np.errstate(invalid="ignore"):
            th = a / denom
        return np.where(denom == 0.0, 0.5, th)  # degenerate (0,0) input

    def inverse(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if np.any((theta <= 0.0) | (theta >= 1.0)):
            raise ValueError("inverse map requires theta strictly inside (0,1)")
        if self.kind == SIGMOID:
            return np.log(theta) - np.log(1.0 - theta)
        if self.kind == DIRECT:
            return theta.copy()
        if self.kind == COSINE:
            return -np.arccos(2.0 * theta - 1.0) + np.pi
        r1 = (theta / (1.0 - theta)) ** (1.0 / self.escort_power)
        return np.stack([r1, np.ones_like(r1)], axis=-1)

    def score(self, r, z) -> np.ndarray:
        """Gradient of log p(z; theta(r)) w.r.t. r; broadcasts over leading axes of z.

        Result has the shape of z for scalar-parameter kinds and z.shape + (2,)
        for escort.
        """
        r = np.asarray(r, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        th = self.theta(r)
        degenerate = (th <= 0.0) | (th >= 1.0)
        if self.kind == SIGMOID:
            out = z - th
            return np.where(degenerate, 0.0, out)
        if self.kind == DIRECT:
            q = np.where(degenerate, 1.0, th * (1.0 - th))
            return np.where(degenerate, 0.0, (z - th) / q)
        if self.kind == COSINE:
            s = np.sin(r)
            bad = degenerate | (s == 0.0)
            s = np.where(bad, 1.0, s)
            return np.where(bad, 0.0, (np.cos(r) + (2.0 * z - 1.0)) / s)
        p = self.escort_power
        r1 = np.where(r[..., 0] == 0.0, 1.0, r[..., 0])
        r2 = np.where(r[..., 1] == 0.0, 1.0, r[..., 1])
        bad1 = degenerate | (r[..., 0] == 0.0)
        bad2 = degenerate | (r[..., 1] == 0.0)
        diff = th - z
        g1 = np.where(bad1, 0.0, -diff * p / r1)
        g2 = np.where(bad2, 0.0, diff * p / r2)
        return np.stack([g1, g2], axis=-1)

    def dtheta_dr(self, r) -> np.ndarray:
        """Elementwise Jacobian factors d theta_i / d r_i (shape of r)."""
        r = np.asarray(r, dtype=np.float64)
        th = self.theta(r)
        if self.kind == SIGMOID:
            return th * (1.0 - th)
        if self.kind == DIRECT:
            return np.ones_like(r)
        if self.kind == COSINE:
            return 0.5 * np.sin(r)
        p = self.escort_power
        q = th * (1.0 - th)
        r1 = np.where(r[..., 0] == 0.0, 1.0, r[..., 0])
        r2 = np.where(r[..., 1] == 0.0, 1.0, r[..., 1])
        d1 = np.where(r[..., 0] == 0.0, 0.0, q * p / r1)
        d2 = np.where(r[..., 1] == 0.0, 0.0, -q * p / r2)
        return np.stack([d1, d2], axis=-1)

    def map_gradient(self, r, grad_theta) -> np.ndarray:
        """Chain-rule a gradient w.r.t. theta into a gradient w.r.t. r."""
        jac = self.dtheta_dr(r)
        grad_theta = np.asarray(grad_theta, dtype=np.float64)
        if self.kind == ESCORT:
            return jac * grad_theta[..., None]
        return jac * grad_theta

    def project(self, r) -> np.ndarray:
        """Post-update projection; only the direct kind constrains its domain."""
        if self.kind == DIRECT:
            return np.clip(r, self.direct_clamp, 1.0 - self.direct_clamp)
        return np.asarray(r, dtype=np.float64)

    def init_from_theta(self, theta) -> np.ndarray:
        return self.inverse(theta)


def make_parametrization(kind: str, escort_power: float = 4.0, direct_clamp: float = 1e-6) -> Parametrization:
    return Parametrization(kind=kind, escort_power=escort_power, direct_clamp=direct_clamp)
