"""
Per-agent Q networks summed into the team value.

Each agent's network reads its own observation and action.  With
``shared=True`` one network (slot 0) serves every agent; otherwise agent
``i`` owns slot ``i``.  ``input_mode="outer"`` feeds the flattened
outer product of the observation and action encodings, so a single
linear layer whose bias is zero is exactly a lookup table over (o, a).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from django.db import models

from apps.autodiff.mlp import MlpParams, MlpTrace, mlp_forward, mlp_trace
from apps.autodiff.tensor import Activation, Tensor
from apps.core.exceptions import ArgumentError, DimensionError

logger = logging.getLogger(__name__)


class QInputMode(models.TextChoices):
    CONCAT = "concat", "concat(o, a)"
    OUTER = "outer", "outer(o, a)"


@dataclass(frozen=True)
class QEnsemble:
    online: tuple[MlpParams, ...]
    target: tuple[MlpParams, ...]
    n_agents: int
    gamma: float
    obs_dim: int
    action_dim: int
    shared: bool = True
    input_mode: str = QInputMode.CONCAT

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ArgumentError(f"gamma must be in [0, 1), got {self.gamma}")
        expected = 1 if self.shared else self.n_agents
        if len(self.online) != expected or len(self.target) != expected:
            raise DimensionError(f"expected {expected} online/target network(s)")
        for online, target in zip(self.online, self.target):
            if online.sizes != target.sizes:
                raise DimensionError("target network shapes must mirror online shapes")
            if online.input_dim != self.input_width or online.output_dim != 1:
                raise DimensionError(
                    f"Q network must map width {self.input_width} to 1, got {online.sizes}"
                )

    @classmethod
    def create(
        cls,
        *,
        n_agents: int,
        obs_dim: int,
        action_dim: int,
        gamma: float,
        hidden_dims: Sequence[int] = (64, 64),
        shared: bool = True,
        activation: str = Activation.RELU,
        input_mode: str = QInputMode.CONCAT,
        seed: int = 0,
    ) -> QEnsemble:
        width = cls._width(input_mode, obs_dim, action_dim)
        count = 1 if shared else n_agents
        online = tuple(
            MlpParams.initialize([width, *hidden_dims, 1], activation=activation, seed=seed + slot)
            for slot in range(count)
        )
        return cls(
            online=online,
            target=online,
            n_agents=n_agents,
            gamma=gamma,
            obs_dim=obs_dim,
            action_dim=action_dim,
            shared=shared,
            input_mode=input_mode,
        )

    @classmethod
    def from_tables(cls, tables: Sequence[np.ndarray], gamma: float) -> QEnsemble:
        """Per-agent lookup tables ``Q_i[o, a]`` over one-hot encodings, as one affine layer with a zero bias."""
        tables = [np.asarray(t, dtype=np.float64) for t in tables]
        obs_dim, action_dim = tables[0].shape
        online = tuple(MlpParams.affine(t.reshape(1, -1), [0.0]) for t in tables)
        return cls(
            online=online,
            target=online,
            n_agents=len(tables),
            gamma=gamma,
            obs_dim=obs_dim,
            action_dim=action_dim,
            shared=False,
            input_mode=QInputMode.OUTER,
        )

    @staticmethod
    def _width(input_mode: str, obs_dim: int, action_dim: int) -> int:
        if input_mode == QInputMode.OUTER:
            return obs_dim * action_dim
        return obs_dim + action_dim

    @property
    def input_width(self) -> int:
        return self._width(self.input_mode, self.obs_dim, self.action_dim)

    def slot(self, agent: int) -> int:
        if not 0 <= agent < self.n_agents:
            raise ArgumentError(f"agent {agent} out of range for {self.n_agents} agent(s)")
        return 0 if self.shared else agent

    def with_online(self, online: Sequence[MlpParams]) -> QEnsemble:
        return replace(self, online=tuple(online))

    # ── Evaluation ───────────────────────────────────────────────

    def features(self, obs, action) -> Tensor:
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        action = np.atleast_2d(np.asarray(action, dtype=np.float64))
        if obs.shape[1] != self.obs_dim or action.shape[1] != self.action_dim:
            raise DimensionError(
                f"Q input expects obs width {self.obs_dim} and action width "
                f"{self.action_dim}, got {obs.shape[1]} and {action.shape[1]}"
            )
        if obs.shape[0] != action.shape[0]:
            raise DimensionError("obs and action row counts differ")
        if self.input_mode == QInputMode.OUTER:
            return np.einsum("bi,bj->bij", obs, action).reshape(obs.shape[0], -1)
        return np.concatenate([obs, action], axis=1)

    def evaluate(self, agent: int, obs, action, *, target: bool = False) -> Tensor:
        nets = self.target if target else self.online
        return mlp_forward(nets[self.slot(agent)], self.features(obs, action))[:, 0]

    def trace(self, agent: int, obs, action, nets: Sequence[MlpParams]) -> MlpTrace:
        return mlp_trace(nets[self.slot(agent)], self.features(obs, action))


def joint_q(q: QEnsemble, obs, actions, *, target: bool = False) -> Tensor:
    """Q^tot(o, a) = Σ_i Q_i(o_i, a_i) for ``(B, N, ·)`` inputs."""
    obs = np.asarray(obs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if obs.shape[1] != q.n_agents or actions.shape[1] != q.n_agents:
        raise ArgumentError(f"expected {q.n_agents} agent column(s)")
    return sum(q.evaluate(i, obs[:, i], actions[:, i], target=target) for i in range(q.n_agents))


def target_update(q: QEnsemble, tau: float) -> QEnsemble:
    """Polyak averaging: target := tau · online + (1 - tau) · target."""
    if not 0.0 <= tau <= 1.0:
        raise ArgumentError(f"tau must be in [0, 1], got {tau}")
    if tau == 1.0:
        return replace(q, target=q.online)
    target = tuple(
        tgt.map(lambda t, o: tau * o + (1.0 - tau) * t, onl)
        for tgt, onl in zip(q.target, q.online)
    )
    return replace(q, target=target)


def advantage(q: QEnsemble, agent: int, obs, a_dataset, a_policy) -> Tensor:
    """A_i = Q_i(o_i, a_dataset) - Q_i(o_i, a_policy)."""
    return q.evaluate(agent, obs, a_dataset) - q.evaluate(agent, obs, a_policy)
