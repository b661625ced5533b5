from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import DimensionError


@dataclass(frozen=True)
class JointTransitionBatch:
    """Team transitions ``(o, a, o', r, done)``; per-agent arrays are ``(B, N, ·)``."""

    obs: Tensor
    actions: Tensor
    next_obs: Tensor
    rewards: Tensor
    dones: Tensor

    def __post_init__(self):
        if self.obs.ndim != 3 or self.actions.ndim != 3:
            raise DimensionError("obs and actions must be (rows, agents, width)")
        if self.next_obs.shape != self.obs.shape:
            raise DimensionError("next_obs must have the shape of obs")
        rows, agents = self.obs.shape[:2]
        if self.actions.shape[:2] != (rows, agents):
            raise DimensionError(
                f"actions are {self.actions.shape[:2]}, observations are {(rows, agents)}"
            )
        for name in ("rewards", "dones"):
            if getattr(self, name).shape != (rows,):
                raise DimensionError(f"{name} must have shape ({rows},)")

    @classmethod
    def from_arrays(cls, obs, actions, next_obs, rewards, dones) -> JointTransitionBatch:
        return cls(
            obs=np.asarray(obs, dtype=np.float64),
            actions=np.asarray(actions, dtype=np.float64),
            next_obs=np.asarray(next_obs, dtype=np.float64),
            rewards=np.asarray(rewards, dtype=np.float64).reshape(-1),
            dones=np.asarray(dones, dtype=np.float64).reshape(-1),
        )

    @property
    def rows(self) -> int:
        return int(self.obs.shape[0])

    @property
    def n_agents(self) -> int:
        return int(self.obs.shape[1])

    def take(self, index) -> JointTransitionBatch:
        return JointTransitionBatch(
            obs=self.obs[index],
            actions=self.actions[index],
            next_obs=self.next_obs[index],
            rewards=self.rewards[index],
            dones=self.dones[index],
        )
