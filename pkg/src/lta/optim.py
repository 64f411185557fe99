"""Adam with bias correction, operating on raw parameter/gradient arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericsError


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and the step count."""

    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)
    step_count: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            step_count=0,
        )


def adam_step(
    params,
    grads,
    state: AdamState,
    alpha: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_num: float = 1e-8,
):
    """One bias-corrected Adam update, in place on ``params``.

    p -= alpha * m_hat / (sqrt(v_hat) + eps_num). Raises on NaN gradients.
    """
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ConfigurationError(f"Adam betas must lie in [0,1): {beta1}, {beta2}")
    if alpha <= 0.0:
        raise ConfigurationError(f"Adam alpha must be positive: {alpha}")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise DimensionError("params/grads/state length mismatch")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise DimensionError(f"grad shape {g.shape} does not match param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericsError("NaN/Inf in gradient passed to adam_step")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= alpha * (m / bc1) / (np.sqrt(v / bc2) + eps_num)
    return params, state
