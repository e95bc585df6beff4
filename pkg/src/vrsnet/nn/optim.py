"""RMSProp with per-step exponential learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    learning_rate: float = 1e-4
    decay_factor: float = 1.0 - 1e-4
    rho: float = 0.9
    epsilon_opt: float = 1e-8
    accum: dict = field(default_factory=dict)  # name -> second-moment array

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0.0 < self.decay_factor <= 1.0):
            raise ValueError("decay_factor must be in (0,1]")


def rmsprop_step(params: dict, grads: dict, state: OptimizerState) -> None:
    """In-place update of every parameter, then one learning-rate decay.

    v <- rho*v + (1-rho)*g^2;  p <- p - lr * g / (sqrt(v) + eps)
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        v = state.accum.get(name)
        if v is None:
            v = np.zeros_like(p)
            state.accum[name] = v
        np.multiply(v, state.rho, out=v)
        v += (1.0 - state.rho) * np.square(g, dtype=p.dtype)
        p -= (state.learning_rate * g / (np.sqrt(v) + state.epsilon_opt)).astype(p.dtype)
    state.learning_rate *= state.decay_factor
