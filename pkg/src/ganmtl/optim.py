"""Adam optimizer over named parameters, with serializable state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import GradientError, Param


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass
class AdamState:
    """Per-parameter first/second moment estimates plus the shared step count.

    Moments are keyed by parameter name and created lazily on first update,
    so the same state object can serve a model whose parameter list is known
    only at run time.  t counts completed update steps.
    """

    config: AdamConfig = field(default_factory=AdamConfig)
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: list[Param]) -> None:
    """Apply one Adam update in place using each parameter's current .grad.

    Bias-corrected moments: m_hat = m / (1 - beta1^t), v_hat = v / (1 -
    beta2^t), update theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    Raises GradientError if any gradient or any updated value is non-finite,
    naming the offending parameter; state is not advanced in that case.
    """
    cfg = state.config
    for p in params:
        if not np.all(np.isfinite(p.grad.data)):
            raise GradientError(f"non-finite gradient for parameter '{p.name}'")

    t = state.t + 1
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    staged = []
    for p in params:
        theta, g = p.value.data, p.grad.data
        m = state.m.get(p.name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        else:
            v = state.v[p.name]
            if m.shape != theta.shape:
                raise ValueError(
                    f"optimizer state for '{p.name}' has shape {m.shape}, "
                    f"parameter has {theta.shape}")
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * np.square(g)
        new_value = theta - cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        if not np.all(np.isfinite(new_value)):
            raise GradientError(f"non-finite update for parameter '{p.name}'")
        staged.append((p, m, v, new_value))
    for p, m, v, new_value in staged:
        state.m[p.name] = m
        state.v[p.name] = v
        p.value.data[...] = new_value
    state.t = t
