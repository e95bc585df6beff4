"""Target reparameterization: maps raw metric values into a balanced training
space centered on the dataset mean, and back.

Both transforms map [0,1] -> [0,1] and are non-decreasing. The clamped
transform is lossy above 2*mu; the logistic transform is strictly increasing
and exactly invertible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MU_MIN = 1e-4
MU_MAX = 1.0 - 1e-4


@dataclass
class TransformSpec:
    kind: str = "clamped"  # clamped | logistic | identity
    mu: float = 0.25  # dataset target mean, in (0,1)
    k_logistic: float = 10.0
    mu_mode: str = "precomputed"  # precomputed | running
    ema_alpha: float = 0.01
    per_channel: bool = False  # scalar mu by default; per-channel behind this flag
    mu_channels: tuple = ()  # used when per_channel

    def __post_init__(self):
        if self.kind not in ("clamped", "logistic", "identity"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if not (0.0 < self.mu < 1.0):
            raise ValueError(f"mu must be in (0,1), got {self.mu}")
        if self.k_logistic <= 0:
            raise ValueError("k_logistic must be > 0")
        if self.mu_mode not in ("precomputed", "running"):
            raise ValueError(f"unknown mu_mode {self.mu_mode!r}")

    def apply(self, y):
        if self.kind == "identity":
            return np.asarray(y)
        if self.kind == "clamped":
            return t_clamped(y, self._mu_for(y))
        return t_logistic(y, self._mu_for(y), self.k_logistic)

    def invert(self, yhat):
        if self.kind == "identity":
            return np.asarray(yhat)
        if self.kind == "clamped":
            return t_clamped_inv(yhat, self._mu_for(yhat))
        return t_logistic_inv(yhat, self._mu_for(yhat), self.k_logistic)

    def _mu_for(self, y):
        if not self.per_channel:
            return self.mu
        y = np.asarray(y)
        mu = np.asarray(self.mu_channels, dtype=np.float64)
        # broadcast over the channel axis of (..., C, h, w)
        if y.ndim < 3 or y.shape[-3] != mu.size:
            raise ValueError("per-channel mu needs (..., C, h, w) targets")
        return mu.reshape((mu.size, 1, 1))


def t_clamped(y, mu):
    """max(min(y / (2 mu), 1), 0)."""
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu <= 0):
        raise ValueError("mu must be > 0")
    return np.clip(np.asarray(y) / (2.0 * mu), 0.0, 1.0)


def t_clamped_inv(yhat, mu):
    """Inverse on the non-saturated region; values above 2 mu are not recovered."""
    return np.asarray(yhat) * (2.0 * np.asarray(mu, dtype=np.float64))


def _logistic(y, mu, k):
    return 1.0 / (1.0 + np.exp(-k * (np.asarray(y, dtype=np.float64) - mu)))


def t_logistic(y, mu, k):
    """Logistic centered on mu, normalized so 0 -> 0 and 1 -> 1."""
    s0 = _logistic(0.0, mu, k)
    s1 = _logistic(1.0, mu, k)
    return (_logistic(y, mu, k) - s0) / (s1 - s0)


def t_logistic_inv(yhat, mu, k):
    """Exact algebraic inverse via the logit; endpoints map exactly."""
    s0 = _logistic(0.0, mu, k)
    s1 = _logistic(1.0, mu, k)
    s = np.asarray(yhat, dtype=np.float64) * (s1 - s0) + s0
    s = np.clip(s, 1e-15, 1.0 - 1e-15)
    return mu + np.log(s / (1.0 - s)) / k


def update_mu(spec: TransformSpec, batch_targets) -> TransformSpec:
    """EMA update of the running dataset mean; returns a new spec."""
    if spec.mu_mode != "running":
        raise ValueError("update_mu requires mu_mode='running'")
    batch = np.asarray(batch_targets)
    if batch.size == 0:
        raise ValueError("empty batch")
    a = spec.ema_alpha
    if spec.per_channel:
        axes = tuple(i for i in range(batch.ndim) if i != batch.ndim - 3)
        m = batch.mean(axis=axes, dtype=np.float64)
        mu = np.clip((1 - a) * np.asarray(spec.mu_channels) + a * m, MU_MIN, MU_MAX)
        return replace(spec, mu_channels=tuple(float(v) for v in mu))
    m = float(batch.mean(dtype=np.float64))
    mu = float(np.clip((1 - a) * spec.mu + a * m, MU_MIN, MU_MAX))
    return replace(spec, mu=mu)
