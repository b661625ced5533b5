"""
Temporal-difference losses for the Q ensemble.

The joint loss regresses Σ_i Q_i(o_i, a_i) onto the team bootstrap
r + γ (1 - done) Σ_i Q̄_i(o'_i, a'_i).  The independent loss (critic
ablation) regresses each Q_i on its own bootstrap r + γ (1 - done) Q̄_i.
Bootstraps come from the target networks and are plain arrays inside
the objective closures.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from apps.autodiff.mlp import LossEvaluation, MlpParams, Pullback
from apps.autodiff.tensor import Tensor, ensure_finite
from apps.core.exceptions import ArgumentError

from .ensemble import QEnsemble
from .transitions import JointTransitionBatch

logger = logging.getLogger(__name__)

EnsembleObjective = Callable[[tuple[MlpParams, ...]], LossEvaluation]


def _check_agents(q: QEnsemble, batch: JointTransitionBatch, next_actions: Sequence) -> list[Tensor]:
    if batch.n_agents != q.n_agents:
        raise ArgumentError(f"batch has {batch.n_agents} agent(s), ensemble has {q.n_agents}")
    if len(next_actions) != q.n_agents:
        raise ArgumentError(f"got next actions for {len(next_actions)} agent(s), expected {q.n_agents}")
    return [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in next_actions]


def _bootstrap(q: QEnsemble, batch: JointTransitionBatch, agent: int, next_action: Tensor) -> Tensor:
    return q.evaluate(agent, batch.next_obs[:, agent], next_action, target=True)


def joint_td_target(q: QEnsemble, batch: JointTransitionBatch, next_actions: Sequence) -> Tensor:
    next_actions = _check_agents(q, batch, next_actions)
    bootstrap = sum(_bootstrap(q, batch, i, a) for i, a in enumerate(next_actions))
    target = batch.rewards + q.gamma * (1.0 - batch.dones) * bootstrap
    return ensure_finite(target, name="TD target")


def joint_td_objective(
    q: QEnsemble, batch: JointTransitionBatch, next_actions: Sequence
) -> EnsembleObjective:
    target = joint_td_target(q, batch, next_actions)

    def objective(nets: tuple[MlpParams, ...]) -> LossEvaluation:
        traces = [q.trace(i, batch.obs[:, i], batch.actions[:, i], nets) for i in range(q.n_agents)]
        residual = sum(t.output[:, 0] for t in traces) - target
        value = float(np.mean(residual * residual))
        cotangent = (2.0 * residual / batch.rows)[:, None]
        pullbacks = tuple(Pullback(t, cotangent, q.slot(i)) for i, t in enumerate(traces))
        return LossEvaluation(value=value, pullbacks=pullbacks)

    return objective


def joint_td_loss(q: QEnsemble, batch: JointTransitionBatch, next_actions: Sequence) -> float:
    """mean_b [Σ_i Q_i(o_i, a_i) - (r + γ (1 - done) Σ_i Q̄_i(o'_i, a'_i))]²."""
    return joint_td_objective(q, batch, next_actions)(q.online).value


def independent_td_objective(
    q: QEnsemble, batch: JointTransitionBatch, next_actions: Sequence
) -> EnsembleObjective:
    """Sum over agents of each agent's own single-agent TD loss."""
    next_actions = _check_agents(q, batch, next_actions)
    targets = [
        batch.rewards + q.gamma * (1.0 - batch.dones) * _bootstrap(q, batch, i, a)
        for i, a in enumerate(next_actions)
    ]

    def objective(nets: tuple[MlpParams, ...]) -> LossEvaluation:
        value = 0.0
        pullbacks = []
        for i, target in enumerate(targets):
            trace = q.trace(i, batch.obs[:, i], batch.actions[:, i], nets)
            residual = trace.output[:, 0] - target
            value += float(np.mean(residual * residual))
            pullbacks.append(Pullback(trace, (2.0 * residual / batch.rows)[:, None], q.slot(i)))
        return LossEvaluation(value=value, pullbacks=tuple(pullbacks))

    return objective


def independent_td_loss(q: QEnsemble, agent: int, batch: JointTransitionBatch, next_action) -> float:
    """mean_b [Q_i(o_i, a_i) - (r + γ (1 - done) Q̄_i(o'_i, a'_i))]² for one agent."""
    next_action = np.atleast_2d(np.asarray(next_action, dtype=np.float64))
    target = batch.rewards + q.gamma * (1.0 - batch.dones) * _bootstrap(q, batch, agent, next_action)
    prediction = q.evaluate(agent, batch.obs[:, agent], batch.actions[:, agent])
    residual = prediction - target
    return float(np.mean(residual * residual))
