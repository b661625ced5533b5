"""
Decentralized execution
=======================
Every agent samples its own action from its own observation with its
own random stream; no agent reads another agent's observation.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from apps.autodiff.tensor import Tensor
from apps.core.exceptions import ArgumentError, DimensionError
from apps.environments.registry import Environment

from .policies import PolicySet

logger = logging.getLogger(__name__)


def _agent_streams(rng, n_agents: int) -> Sequence[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        return [rng] * n_agents
    streams = list(rng)
    if len(streams) != n_agents:
        raise ArgumentError(f"expected {n_agents} random stream(s), got {len(streams)}")
    return streams


def execute(policies: PolicySet, obs, rng) -> Tensor:
    """
    Joint action ``(N, action_dim)`` from per-agent observations ``(N, obs_dim)``.

    ``rng`` is one generator (consumed agent by agent) or one generator
    per agent.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] != policies.n_agents:
        raise DimensionError(f"expected one observation row per agent ({policies.n_agents}), got {obs.shape}")
    streams = _agent_streams(rng, policies.n_agents)
    return np.stack([policies.act(i, obs[i], streams[i]) for i in range(policies.n_agents)])


def run_episode(policies: PolicySet, env: Environment, rng: np.random.Generator) -> float:
    """Undiscounted team return of one full episode."""
    state = env.reset(rng)
    obs = env.observe(state)
    total, done = 0.0, False
    while not done:
        result = env.step(state, execute(policies, obs, rng), rng)
        total += float(result.reward)
        state, obs, done = result.state, result.obs, result.done
    return total


def evaluate(
    policies: PolicySet,
    env: Environment,
    n_episodes: int = 10,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Mean and standard deviation of the undiscounted team return."""
    if n_episodes < 1:
        raise ArgumentError(f"n_episodes must be >= 1, got {n_episodes}")
    if policies.n_agents != env.n_agents:
        raise ArgumentError(f"policy set has {policies.n_agents} agent(s), env has {env.n_agents}")
    rng = rng if rng is not None else np.random.default_rng(0)
    returns = np.array([run_episode(policies, env, rng) for _ in range(n_episodes)])
    logger.debug("Evaluated %d episode(s) on %s: mean %.4f", n_episodes, env.name, returns.mean())
    return float(returns.mean()), float(returns.std())
