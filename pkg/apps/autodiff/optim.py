from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from apps.core.exceptions import ArgumentError, DimensionError

from .mlp import MlpParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """First/second moments mirror the parameter tree they belong to."""

    m: MlpParams
    v: MlpParams
    step_count: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: MlpParams, lr: float = 3e-4, **kwargs) -> AdamState:
        if lr < 0:
            raise ArgumentError(f"learning rate must be >= 0, got {lr}")
        zeros = params.zeros_like()
        return cls(m=zeros, v=zeros, lr=lr, **kwargs)


def adam_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    if [a.shape for a in grads.arrays()] != [a.shape for a in params.arrays()]:
        raise DimensionError("gradient shapes do not mirror params")
    if [a.shape for a in state.m.arrays()] != [a.shape for a in params.arrays()]:
        raise DimensionError("optimizer state does not mirror params")

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    m = state.m.map(lambda m_, g: b1 * m_ + (1.0 - b1) * g, grads)
    v = state.v.map(lambda v_, g: b2 * v_ + (1.0 - b2) * g * g, grads)
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    lr, eps = state.lr, state.eps
    updated = params.map(
        lambda p, m_, v_: p - lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps),
        m,
        v,
    )
    return updated, replace(state, m=m, v=v, step_count=t)
