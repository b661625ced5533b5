"""
Exact dynamic programming on tabular Dec-POMDPs.

Q tables here are indexed by ``(state, joint action)`` where the joint
action index is the row-major flattening of the per-agent indices.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from apps.core.exceptions import ArgumentError, NumericError
from apps.environments.tabular import TabularDecPOMDP

from .tables import ExactPolicy, ExactQ, check_enumeration_size

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


def joint_policy(env: TabularDecPOMDP, agent_policies: Sequence[ExactPolicy]) -> ExactPolicy:
    """π(a | s) = Π_i π_i(a_i | Ω(s, i)) over joint actions."""
    if len(agent_policies) != env.n_agents:
        raise ArgumentError(f"need {env.n_agents} agent policies, got {len(agent_policies)}")
    check_enumeration_size(env.n_actions**env.n_agents)
    rows = []
    for s in range(env.n_states):
        row = np.ones(1)
        for i, policy in enumerate(agent_policies):
            row = np.multiply.outer(row, policy.table[env.obs_map[i, s]]).ravel()
        rows.append(row)
    return ExactPolicy(np.asarray(rows))


def _joint_tables(env: TabularDecPOMDP) -> tuple[np.ndarray, np.ndarray]:
    n_joint = env.n_actions**env.n_agents
    check_enumeration_size(n_joint)
    return (
        env.rewards.reshape(env.n_states, n_joint),
        env.transitions.reshape(env.n_states, n_joint, env.n_states),
    )


def exact_q_evaluation(
    env: TabularDecPOMDP,
    policy: ExactPolicy | Sequence[ExactPolicy],
    gamma: float | None = None,
) -> ExactQ:
    """
    Solve Q = R + γ P_π Q for the discounted infinite-horizon Q of ``policy``.

    ``policy`` is a joint policy over states or one local policy per agent.
    """
    if not isinstance(policy, ExactPolicy):
        policy = joint_policy(env, policy)
    gamma = env.gamma if gamma is None else gamma
    rewards, transitions = _joint_tables(env)
    n_states, n_joint = rewards.shape
    if policy.table.shape != (n_states, n_joint):
        raise ArgumentError(f"joint policy must be {(n_states, n_joint)}, got {policy.table.shape}")

    # P[(s, a), (s', a')] = T(s' | s, a) π(a' | s')
    successor = np.einsum("sat,tb->satb", transitions, policy.table).reshape(n_states * n_joint, -1)
    system = np.eye(n_states * n_joint) - gamma * successor
    try:
        condition = np.linalg.cond(system)
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise np.linalg.LinAlgError(f"condition number {condition:.3e}")
        q = np.linalg.solve(system, rewards.ravel())
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"policy evaluation system is singular (gamma={gamma}): {exc}") from exc

    residual = np.max(np.abs(system @ q - rewards.ravel()))
    if residual > 1e-10 * max(1.0, np.max(np.abs(q))):
        raise NumericError(f"Bellman residual {residual:.3e} too large", value=float(residual))
    return ExactQ(q.reshape(n_states, n_joint))


def optimal_return(env: TabularDecPOMDP) -> float:
    """
    Best expected undiscounted return over ``env.horizon`` steps from the
    initial distribution, by backward induction over joint actions.
    """
    rewards, transitions = _joint_tables(env)
    value = np.zeros(env.n_states)
    for _ in range(env.horizon):
        value = np.max(rewards + transitions @ value, axis=1)
    return float(env.initial @ value)


def random_instance(
    seed: int,
    *,
    n_states: int = 5,
    n_agents: int = 1,
    n_actions: int = 2,
    gamma: float = 0.9,
    horizon: int = 10,
) -> TabularDecPOMDP:
    """Random fully-observed instance with Dirichlet transitions and normal rewards."""
    rng = np.random.default_rng(seed)
    joint = (n_actions,) * n_agents
    transitions = rng.dirichlet(np.ones(n_states), size=(n_states, *joint))
    # exact row normalisation after the Dirichlet draw
    transitions /= transitions.sum(axis=-1, keepdims=True)
    return TabularDecPOMDP(
        name=f"random-{seed}",
        n_agents=n_agents,
        n_actions=n_actions,
        transitions=transitions,
        rewards=rng.normal(size=(n_states, *joint)),
        obs_map=np.tile(np.arange(n_states), (n_agents, 1)),
        initial=np.full(n_states, 1.0 / n_states),
        gamma=gamma,
        horizon=horizon,
    )


def random_policy(rng: np.random.Generator, n_obs: int, n_actions: int) -> ExactPolicy:
    return ExactPolicy.normalized(rng.dirichlet(np.ones(n_actions), size=n_obs))
