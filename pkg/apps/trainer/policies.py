"""
Per-agent policies built on velocity fields.

With ``shared=True`` one field serves every agent and each agent's
observation is extended by its one-hot id (``agent_id_features``).
Sampling draws raw vectors from the field; ``act`` projects them onto
the action space (argmax one-hot for discrete spaces, clipping for
boxes).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError
from apps.environments.spaces import ActionSpace
from apps.flows.fields import AvgVelocityNet, FieldKind
from apps.flows.samplers import sample_multi_step, sample_one_step

logger = logging.getLogger(__name__)


def policy_obs_dim(env_obs_dim: int, n_agents: int, agent_id_features: bool) -> int:
    return env_obs_dim + (n_agents if agent_id_features else 0)


def agent_features(obs_i, agent: int, n_agents: int, agent_id_features: bool) -> Tensor:
    """Observation of agent ``agent`` as its networks see it (``(B, ·)`` or ``(·,)``)."""
    obs_i = np.asarray(obs_i, dtype=np.float64)
    if not agent_id_features:
        return obs_i
    one_hot = np.zeros(n_agents)
    one_hot[agent] = 1.0
    if obs_i.ndim == 1:
        return np.concatenate([obs_i, one_hot])
    return np.concatenate([obs_i, np.broadcast_to(one_hot, (obs_i.shape[0], n_agents))], axis=1)


@dataclass(frozen=True)
class PolicySet:
    fields: tuple[AvgVelocityNet, ...]
    n_agents: int
    action_space: ActionSpace
    shared: bool = True
    agent_id_features: bool = True
    sampling_steps: int = 1

    def __post_init__(self):
        expected = 1 if self.shared else self.n_agents
        if len(self.fields) != expected:
            raise ArgumentError(f"expected {expected} field(s), got {len(self.fields)}")
        if self.sampling_steps < 1:
            raise ArgumentError(f"sampling_steps must be >= 1, got {self.sampling_steps}")

    @classmethod
    def create(
        cls,
        *,
        n_agents: int,
        obs_dim: int,
        action_space: ActionSpace,
        kind: str,
        hidden_dims: Sequence[int],
        activation: str,
        seeds: Sequence[int],
        shared: bool = True,
        agent_id_features: bool = True,
        sampling_steps: int = 1,
    ) -> PolicySet:
        width = policy_obs_dim(obs_dim, n_agents, agent_id_features)
        count = 1 if shared else n_agents
        fields = tuple(
            AvgVelocityNet.create(
                action_dim=action_space.dim,
                obs_dim=width,
                hidden_dims=hidden_dims,
                kind=kind,
                activation=activation,
                seed=int(seeds[slot]),
            )
            for slot in range(count)
        )
        return cls(
            fields=fields,
            n_agents=n_agents,
            action_space=action_space,
            shared=shared,
            agent_id_features=agent_id_features,
            sampling_steps=sampling_steps,
        )

    @property
    def kind(self) -> str:
        return self.fields[0].kind

    def slot(self, agent: int) -> int:
        if not 0 <= agent < self.n_agents:
            raise ArgumentError(f"agent {agent} out of range for {self.n_agents} agent(s)")
        return 0 if self.shared else agent

    def field_for(self, agent: int) -> AvgVelocityNet:
        return self.fields[self.slot(agent)]

    def with_fields(self, fields: Sequence[AvgVelocityNet]) -> PolicySet:
        return replace(self, fields=tuple(fields))

    def features(self, agent: int, obs_i) -> Tensor:
        return agent_features(obs_i, agent, self.n_agents, self.agent_id_features)

    def sample(self, agent: int, obs_i, rng: np.random.Generator, c=1) -> Tensor:
        """Raw field sample for agent ``agent`` from its local observation."""
        field = self.field_for(agent)
        obs = self.features(agent, obs_i)
        labels = c if field.kind == FieldKind.CONDITIONAL_MEANFLOW else None
        if self.sampling_steps == 1:
            return sample_one_step(field, obs, labels, rng)
        return sample_multi_step(field, obs, labels, self.sampling_steps, rng)

    def act(self, agent: int, obs_i, rng: np.random.Generator) -> Tensor:
        """Projected action with the value-guidance condition set (c = 1)."""
        return self.action_space.project(self.sample(agent, obs_i, rng, c=1))
