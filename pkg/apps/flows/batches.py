from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError, DimensionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowBatch:
    """(o, a, ε, k, r, c) rows for the flow losses; 0 <= r <= k <= 1."""

    obs: Tensor
    action: Tensor
    epsilon: Tensor
    k: Tensor
    r: Tensor
    c: np.ndarray

    def __post_init__(self):
        rows = self.action.shape[0]
        for name in ("obs", "epsilon"):
            if getattr(self, name).shape[0] != rows:
                raise DimensionError(f"{name} has {getattr(self, name).shape[0]} rows, expected {rows}")
        if self.epsilon.shape != self.action.shape:
            raise DimensionError("epsilon must have the action's shape")
        for name in ("k", "r", "c"):
            if getattr(self, name).shape != (rows,):
                raise DimensionError(f"{name} must have shape ({rows},)")
        if np.any(self.r < 0) or np.any(self.r > self.k) or np.any(self.k > 1):
            raise ArgumentError("flow times must satisfy 0 <= r <= k <= 1")
        if not np.all((self.c == 0) | (self.c == 1)):
            raise ArgumentError("condition labels must be 0 or 1")

    @property
    def rows(self) -> int:
        return int(self.action.shape[0])

    @property
    def a_k(self) -> Tensor:
        """Point on the linear path (1 - k) a + k ε."""
        k = self.k[:, None]
        return (1.0 - k) * self.action + k * self.epsilon

    @property
    def velocity(self) -> Tensor:
        """Sample-conditional velocity ε - a."""
        return self.epsilon - self.action

    @classmethod
    def concat(cls, batches: Sequence[FlowBatch]) -> FlowBatch:
        return cls(
            obs=np.concatenate([b.obs for b in batches]),
            action=np.concatenate([b.action for b in batches]),
            epsilon=np.concatenate([b.epsilon for b in batches]),
            k=np.concatenate([b.k for b in batches]),
            r=np.concatenate([b.r for b in batches]),
            c=np.concatenate([b.c for b in batches]),
        )


def make_flow_batch(
    obs,
    action,
    c_labels,
    rng: np.random.Generator,
    r_equals_k_fraction: float = 0.25,
) -> FlowBatch:
    """
    Draw (k, r, ε) for each (o, a) row.

    k and r are two uniforms ordered so r <= k; exactly
    ``round(fraction * B)`` randomly chosen rows get r := k so the
    instantaneous field u(·, k, k | ·) is trained.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    action = np.atleast_2d(np.asarray(action, dtype=np.float64))
    rows = action.shape[0]
    if rows == 0:
        raise ArgumentError("cannot build a flow batch from zero rows")
    if obs.shape[0] != rows:
        raise ArgumentError(f"obs has {obs.shape[0]} rows, action has {rows}")
    if not 0.0 <= r_equals_k_fraction <= 1.0:
        raise ArgumentError(f"r_equals_k_fraction must be in [0, 1], got {r_equals_k_fraction}")

    c = np.ones(rows, dtype=np.int64) if c_labels is None else np.asarray(c_labels, dtype=np.int64).reshape(-1)
    times = rng.uniform(0.0, 1.0, size=(2, rows))
    k = times.max(axis=0)
    r = times.min(axis=0)
    n_equal = int(round(r_equals_k_fraction * rows))
    if n_equal:
        chosen = rng.permutation(rows)[:n_equal]
        r[chosen] = k[chosen]
    epsilon = rng.standard_normal(action.shape)
    return FlowBatch(obs=obs, action=action, epsilon=epsilon, k=k, r=r, c=c)
