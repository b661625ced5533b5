"""
Action spaces.

Policies and Q networks work on encoded actions: one-hot rows for
discrete spaces, raw vectors for boxes.  ``project`` maps a policy
sample back onto the space (argmax one-hot, or clipping).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError, DimensionError


@dataclass(frozen=True)
class DiscreteSpace:
    n: int

    @property
    def dim(self) -> int:
        return self.n

    def validate(self, index) -> np.ndarray:
        index = np.asarray(index)
        if not np.issubdtype(index.dtype, np.integer) or np.any((index < 0) | (index >= self.n)):
            raise ArgumentError(f"action index {index.tolist()} outside 0..{self.n - 1}")
        return index.astype(np.int64)

    def encode(self, index) -> Tensor:
        return np.eye(self.n)[self.validate(index)]

    def decode(self, encoded) -> np.ndarray:
        encoded = np.asarray(encoded, dtype=np.float64)
        if encoded.shape[-1] != self.n:
            raise DimensionError(f"discrete action needs width {self.n}, got {encoded.shape[-1]}")
        # argmax breaks ties at the lowest index
        return np.argmax(encoded, axis=-1)

    def project(self, encoded) -> Tensor:
        return self.encode(self.decode(encoded))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.integers(self.n, size=size)


@dataclass(frozen=True)
class BoxSpace:
    dim: int
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.low >= self.high:
            raise ArgumentError(f"box bounds must satisfy low < high, got {self.low}, {self.high}")

    def encode(self, action) -> Tensor:
        action = np.asarray(action, dtype=np.float64)
        if action.shape[-1] != self.dim:
            raise DimensionError(f"box action needs width {self.dim}, got {action.shape[-1]}")
        return action

    def decode(self, encoded) -> Tensor:
        return np.clip(self.encode(encoded), self.low, self.high)

    project = decode

    def sample(self, rng: np.random.Generator, size=None) -> Tensor:
        shape = (self.dim,) if size is None else (*np.atleast_1d(size), self.dim)
        return rng.uniform(self.low, self.high, size=shape)


ActionSpace = DiscreteSpace | BoxSpace


def with_agent_id(obs, n_agents: int) -> Tensor:
    """Append each agent's one-hot id to ``(..., N, obs_dim)`` observations."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-2] != n_agents:
        raise DimensionError(f"expected {n_agents} agent rows, got {obs.shape[-2]}")
    ids = np.broadcast_to(np.eye(n_agents), (*obs.shape[:-2], n_agents, n_agents))
    return np.concatenate([obs, ids], axis=-1)
